"""JSON-ready conversion of nested results."""
import numpy as np
import tree


def _to_python(x):
    if isinstance(x, (str, bool, int)) or x is None:
        return x
    if isinstance(x, float):
        return x
    arr = np.asarray(x)
    if arr.ndim == 0:
        return arr.item()
    return arr.tolist()


def to_jsonable(nest):
    """Converts arrays and numpy scalars in a nest of dicts/lists to python values."""
    return tree.map_structure(_to_python, nest)
