import os


def test_suite():
    """Returns unittest.TestSuite of rgmjmcmc tests for setup.py test
    """
    import unittest
    from os.path import dirname
    py_dir = dirname(dirname(__file__))
    return unittest.defaultTestLoader.discover(py_dir,
                                               top_level_dir=dirname(py_dir))


def long_tests():
    """True if the long statistical runs are requested with $RGMJMCMC_LONG_TESTS."""
    return os.getenv('RGMJMCMC_LONG_TESTS', '0') not in ('', '0', 'false', 'False')
