import os
import yaml
import numpy as np
from astropy.table import Table
from astropy.io import ascii

from rgmjmcmc.log import get_logger
from rgmjmcmc.errors import DataLoadError, ConfigError
from rgmjmcmc.inference import Dataset

#- floats are written with 12 significant digits
FLOAT_FORMAT = '%.12g'


def load_csv(path, response, family='gaussian'):
    '''Read a CSV file with a header line into a Dataset.

    Args:
        path : CSV file name
        response : name of the response column, all other columns are covariates
        family : 'gaussian' or 'binomial'

    Returns:
        Dataset

    Raises DataLoadError with the row and column of the first missing or
    non-numeric cell, or if the response column is absent.
    '''
    log = get_logger()
    if not os.path.isfile(path):
        message = 'no file {}'.format(path)
        log.error(message)
        raise DataLoadError(message)
    log.debug("loading {}".format(path))

    #- read as text, without masking, so that bad cells can be located
    try:
        table = Table.read(path, format='ascii.csv', fast_reader=False, fill_values=[],
                           converters={'*': [ascii.convert_numpy(str)]})
    except ascii.InconsistentTableError as err:
        message = '{}: {}'.format(path, err)
        log.error(message)
        raise DataLoadError(message)
    if response not in table.colnames:
        message = 'response column {} not in {} (columns {})'.format(response, path, table.colnames)
        log.error(message)
        raise DataLoadError(message)

    columns = dict()
    for name in table.colnames:
        values = np.zeros(len(table))
        for row, cell in enumerate(table[name]):
            cell = '' if cell is np.ma.masked else str(cell).strip()
            #- data row numbers start at 1 below the header
            if cell == '':
                message = '{}: missing value at row {} column {}'.format(path, row+1, name)
                log.error(message)
                raise DataLoadError(message)
            try:
                values[row] = float(cell)
            except ValueError:
                message = "{}: non-numeric value '{}' at row {} column {}".format(path, cell, row+1, name)
                log.error(message)
                raise DataLoadError(message)
        columns[name] = values

    names = [name for name in table.colnames if name != response]
    X = np.column_stack([columns[name] for name in names]) if names else np.zeros((len(table), 0))
    try:
        return Dataset(X, columns[response], family=family, names=names, response=response)
    except ValueError as err:
        raise DataLoadError('{}: {}'.format(path, err))


def write_dataset(dataset, path):
    '''Write covariates and response as CSV with a header, response last.'''
    table = Table()
    for i, name in enumerate(dataset.names):
        table[name] = dataset.X[:, i]
    table[dataset.response] = dataset.y
    write_table(table, path)


def write_table(table, path):
    '''Write an astropy Table as CSV, floats with 12 significant digits.'''
    log = get_logger()
    for name in table.colnames:
        if table[name].dtype.kind == 'f':
            table[name].format = FLOAT_FORMAT
    dirname = os.path.dirname(path)
    if dirname != '' and not os.path.isdir(dirname):
        os.makedirs(dirname)
    table.write(path, format='ascii.csv', overwrite=True)
    log.info("wrote {}".format(path))


def read_table(path):
    return Table.read(path, format='ascii.csv')


def read_inclusions(path):
    '''Read an inclusion probability table (columns FEATURE, PROB or FEATURE,
    RENORM_PROB) into a dict canonical key -> probability.
    '''
    log = get_logger()
    table = read_table(path)
    column = None
    for name in ('PROB', 'RENORM_PROB', 'FREQ_PROB'):
        if name in table.colnames:
            column = name
            break
    if 'FEATURE' not in table.colnames or column is None:
        message = '{} has no FEATURE and PROB columns (columns {})'.format(path, table.colnames)
        log.error(message)
        raise DataLoadError(message)
    return {str(key): float(prob) for key, prob in zip(table['FEATURE'], table[column])}


def read_config(path):
    '''Read a YAML configuration file into a dict of sections.'''
    log = get_logger()
    with open(path) as ifile:
        config = yaml.safe_load(ifile)
    if config is None:
        config = dict()
    if not isinstance(config, dict):
        message = '{} is not a YAML mapping'.format(path)
        log.error(message)
        raise ConfigError(message)
    return config


def write_config(config, path):
    '''Write a dict of sections as YAML.'''
    log = get_logger()
    with open(path, 'w') as ofile:
        yaml.safe_dump(config, ofile, default_flow_style=False, sort_keys=False)
    log.info("wrote {}".format(path))


def write_inclusions(inclusion, path):
    '''Write a dict canonical key -> inclusion probability (columns FEATURE, PROB).'''
    keys = sorted(inclusion)
    table = Table()
    table['FEATURE'] = keys if len(keys) > 0 else np.zeros(0, dtype=str)
    table['PROB'] = np.array([inclusion[k] for k in keys], dtype=float)
    write_table(table, path)
