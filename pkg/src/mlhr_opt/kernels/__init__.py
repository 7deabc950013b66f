"""Hot loops. Each module compiles with numba unless ``MLHR_OPT_NUMBA=0``."""
