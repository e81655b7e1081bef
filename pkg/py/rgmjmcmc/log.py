import os
import logging

#- minimal logger factory, one cached logger per level

_levels = {'DEBUG': logging.DEBUG,
           'INFO': logging.INFO,
           'WARN': logging.WARNING,
           'WARNING': logging.WARNING,
           'ERROR': logging.ERROR,
           'FATAL': logging.CRITICAL,
           'CRITICAL': logging.CRITICAL}

_loggers = dict()
def get_logger(level=None, path=None, timestamps=False):
    '''Returns a logger, which can be used like log.info('some message') etc.

    INPUTS: level ... None --> use environment variable RGMJMCMC_LOGLEVEL (default INFO)
                      otherwise string like 'DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'

            path  ... None --> do not log to disk
                      otherwise file where all messages are appended (console output is kept)

            timestamps ... boolean, prefix messages with a timestamp

    OUTPUTS: logger instance
    '''
    if level is None:
        level = os.getenv('RGMJMCMC_LOGLEVEL', 'INFO')
    level = level.upper()

    if level not in _levels:
        raise ValueError('Unknown log level {}; should be DEBUG/INFO/WARNING/ERROR/CRITICAL'.format(level))
    loglevel = _levels[level]

    if level not in _loggers:
        logger = logging.getLogger('rgmjmcmc.'+level)
        logger.setLevel(loglevel)
        logger.propagate = False

        fmt = '%(levelname)s:%(filename)s:%(lineno)s:%(funcName)s:%(message)s'
        datefmt = None
        if timestamps:
            fmt = '%(asctime)s:' + fmt
            datefmt = '%Y%m%dT%H%M%S%z'
        formatter = logging.Formatter(fmt=fmt, datefmt=datefmt)

        handlers = [logging.StreamHandler()]
        if path:
            handlers.append(logging.FileHandler(filename=path, mode='a', encoding='utf-8'))
        for handler in handlers:
            handler.setLevel(loglevel)
            handler.setFormatter(formatter)
            logger.addHandler(handler)

        _loggers[level] = logger

    return _loggers[level]
