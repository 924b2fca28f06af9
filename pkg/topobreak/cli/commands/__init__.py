from . import stability, critvals, test, approx, simulate
