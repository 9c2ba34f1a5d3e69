"""numba switch.

Set ``EQFULLER_DISABLE_NUMBA=1`` to run every kernel as plain numpy/Python.
Kernels are always written so that the undecorated function is valid Python.
"""
import importlib
import importlib.util
import os
import threading

_FLAG = os.environ.get("EQFULLER_DISABLE_NUMBA", "").strip().lower()
NUMBA_DISABLED = _FLAG not in ("", "0", "false", "no")

try:
    if NUMBA_DISABLED:
        raise ImportError
    from numba import njit as _njit
    from numba.core.registry import CPUDispatcher as _Dispatcher
    HAVE_NUMBA = True
except ImportError:
    _njit = None
    _Dispatcher = ()
    HAVE_NUMBA = False


_pure = threading.local()
_pure_lock = threading.Lock()
_pure_modules = {}


def jit(fn=None, **kwargs):
    """``numba.njit(nogil=True)`` when enabled, identity otherwise."""
    def wrap(f):
        if not HAVE_NUMBA or getattr(_pure, "active", False):
            return f
        opts = {"nogil": True}
        opts.update(kwargs)
        return _njit(**opts)(f)
    if fn is not None:
        return wrap(fn)
    return wrap


def is_jitted(fn):
    return HAVE_NUMBA and isinstance(fn, _Dispatcher)


def python_version(fn):
    """Undecorated function behind a dispatcher (or ``fn`` itself)."""
    return getattr(fn, "py_func", fn)


def pure_module(name: str):
    """A private copy of module ``name`` executed with ``jit`` as the identity.

    Kernels call each other by global name, so the ``py_func`` of one
    dispatcher still calls compiled helpers; those reject Python callables as
    arguments.  The copy is pure Python all the way down.
    """
    with _pure_lock:
        if name not in _pure_modules:
            if not HAVE_NUMBA:
                _pure_modules[name] = importlib.import_module(name)
            else:
                spec = importlib.util.find_spec(name)
                mod = importlib.util.module_from_spec(spec)
                _pure.active = True
                try:
                    spec.loader.exec_module(mod)
                finally:
                    _pure.active = False
                _pure_modules[name] = mod
        return _pure_modules[name]
