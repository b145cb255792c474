import numpy as np
from django.conf import settings


def fixed(value, digits=None):
    """Locale-free fixed notation with `digits` significant digits."""
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    digits = digits or settings.POLARLAB_CSV_DIGITS
    return np.format_float_positional(float(value), precision=digits, unique=False, fractional=False, trim='-')
