# -*- coding: utf-8 -*-
"""
================
rgmjmcmc.bitmask
================

Named bit masks defined from YAML bit definitions.

>>> import yaml
>>> _bitdefs = yaml.safe_load('''
... demomask:
...     - [FIRST,  0, "first bit"]
...     - [SECOND, 1, "second bit"]
... ''')
>>> demomask = BitMask('demomask', _bitdefs)
>>> demomask.FIRST | demomask.SECOND
3
>>> demomask.names(2)
['SECOND']
"""


class _MaskBit(int):
    """A single mask bit, an :class:`int` equal to ``2**bitnum`` that also
    carries its name, bit number and comment.
    """
    def __new__(cls, name, bitnum, comment):
        self = super(_MaskBit, cls).__new__(cls, 2**bitnum)
        self.name = name
        self.bitnum = bitnum
        self.mask = 2**bitnum
        self.comment = comment
        return self

    def __str__(self):
        return '{0.name:20s} bit {0.bitnum} mask 0x{0.mask:X} - {0.comment}'.format(self)


class BitMask(object):
    """Bit names, values and comments of one mask.

    Parameters
    ----------
    name : :class:`str`
        Name of this mask, must be a key of `bitdefs`.
    bitdefs : :class:`dict`
        Mask definitions; each value is a list of ``[bitname, bitnum, comment]``.
    """

    def __init__(self, name, bitdefs):
        self._name = name
        self._bits = dict()
        for bitname, bitnum, comment in bitdefs[name]:
            if bitname in self._bits or bitnum in self._bits:
                raise ValueError('{}: duplicate bit {} ({})'.format(name, bitname, bitnum))
            bit = _MaskBit(bitname, bitnum, comment)
            self._bits[bitname] = bit
            self._bits[bitnum] = bit

    def __getitem__(self, bitname):
        return self._bits[bitname]

    def __getattr__(self, name):
        """Enable ``mask.BITNAME`` equivalent to ``mask['BITNAME']``.
        """
        if name.startswith('_'):
            raise AttributeError(name)
        if name in self._bits:
            return self._bits[name]
        raise AttributeError('Unknown mask bit name ' + name)

    def names(self, mask=None):
        """Return names of the bits set in `mask`, or all names if `mask` is None,
        in increasing bit order.
        """
        bitnums = sorted(key for key in self._bits if isinstance(key, int))
        if mask is None:
            return [self._bits[b].name for b in bitnums]
        mask = int(mask)
        return [self._bits[b].name for b in bitnums if mask & self._bits[b].mask]

    def __repr__(self):
        lines = [self._name + ':']
        for bitnum in sorted(key for key in self._bits if isinstance(key, int)):
            bit = self._bits[bitnum]
            lines.append('  - [{:20s} {:2d}, "{}"]'.format(bit.name+',', bit.bitnum, bit.comment))
        return "\n".join(lines)
