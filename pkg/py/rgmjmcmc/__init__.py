#
# See top-level LICENSE.rst file for Copyright information
#
# -*- coding: utf-8 -*-
"""
Reversible genetically modified mode jumping MCMC for Bayesian model
selection and averaging over generated nonlinear and logic features.
"""

from ._version import __version__
