"""Scalar backends: binary64 and arbitrary-precision binary floats.

Every module in this package is generic over the scalar type.  The
binary64 backend works on plain Python floats (and numpy float64 arrays),
the bigfloat backend wraps an isolated mpmath context with a configurable
mantissa size, so several precisions can coexist in one process.
"""

from __future__ import annotations

import math

import mpmath


class Float64Backend:
    """Standard IEEE binary64 arithmetic."""

    name = "binary64"
    prec_bits = 53

    def from_float(self, x):
        return float(x)

    def from_str(self, s):
        return float(s)

    def to_float(self, x):
        return float(x)

    def sqrt(self, x):
        return math.sqrt(x)

    def power(self, x, y):
        return float(x) ** float(y)

    def log(self, x):
        return math.log(x)

    def abs(self, x):
        return abs(x)

    @property
    def eps(self):
        return 2.0 ** -52

    def format(self, x):
        """Shortest round-trip decimal."""
        return repr(float(x))

    def __repr__(self):
        return "Float64Backend()"


class BigFloatBackend:
    """Arbitrary-precision binary floats via a private mpmath context."""

    def __init__(self, bits=512):
        if bits < 53:
            raise ValueError("mantissa must be at least 53 bits")
        self.prec_bits = bits
        self.ctx = mpmath.ctx_mp.MPContext()
        self.ctx.prec = bits
        self.name = f"bigfloat({bits})"

    def from_float(self, x):
        return self.ctx.mpf(x)

    def from_str(self, s):
        return self.ctx.mpf(s)

    def to_float(self, x):
        return float(x)

    def sqrt(self, x):
        return self.ctx.sqrt(x)

    def power(self, x, y):
        return self.ctx.power(x, y)

    def log(self, x):
        return self.ctx.log(x)

    def abs(self, x):
        return abs(self.ctx.mpf(x))

    @property
    def eps(self):
        return self.ctx.mpf(2) ** (1 - self.prec_bits)

    def format(self, x):
        """Fixed 40 significant digits."""
        return self.ctx.nstr(self.ctx.mpf(x), 40)

    def __repr__(self):
        return f"BigFloatBackend(bits={self.prec_bits})"


FLOAT64 = Float64Backend()


def make_backend(spec):
    """Build a backend from a config string: "binary64" or "bigfloat(BITS)"."""
    if isinstance(spec, (Float64Backend, BigFloatBackend)):
        return spec
    s = str(spec).strip().lower()
    if s == "binary64":
        return FLOAT64
    if s.startswith("bigfloat(") and s.endswith(")"):
        return BigFloatBackend(int(s[len("bigfloat(") : -1]))
    if s == "bigfloat":
        return BigFloatBackend()
    raise ValueError(f"unknown scalar backend: {spec!r}")
