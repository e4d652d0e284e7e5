from typing import Any, Callable, Dict, List


class Registry:
    """Name -> function table filled with the `add` decorator."""

    def __init__(self, kind: str):
        self.kind = kind
        self.rules: Dict[str, Callable[..., Any]] = {}

    def add(self, name: str):
        def register_fn_decorator(fn):
            if name in self.rules:
                raise ValueError(f"Duplicate {self.kind} {name!r}")
            self.rules[name] = fn
            return fn

        return register_fn_decorator

    def get(self, name: str) -> Callable[..., Any]:
        try:
            return self.rules[name]
        except KeyError:
            raise ValueError(f"Unknown {self.kind} {name!r}, expected one of {self.names()}") from None

    def apply(self, name: str, **params):
        fn = self.get(name)
        try:
            return fn(**params)
        except TypeError as e:
            raise ValueError(f"Bad parameters for {self.kind} {name!r}: {e}") from None

    def names(self) -> List[str]:
        return sorted(self.rules)

    def __contains__(self, name) -> bool:
        return name in self.rules
