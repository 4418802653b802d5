from typing import Callable, Dict, Generic, List, TypeVar

T = TypeVar("T")


class Factory(Generic[T]):
    """Named registry of creator callables."""

    def __init__(self, kind: str = "creator"):
        self.kind = kind
        self._creators: Dict[str, Callable[..., T]] = {}

    def register(self, key: str) -> Callable[[Callable[..., T]], Callable[..., T]]:
        """Decorator registering a creator function under `key`."""

        def decorator(creator: Callable[..., T]) -> Callable[..., T]:
            self._creators[key] = creator
            return creator

        return decorator

    def create(self, key: str, *args, **kwargs) -> T:
        """Create an instance using the registered creator function."""
        creator = self._creators.get(key)
        if not creator:
            raise KeyError(f"No {self.kind} registered for key: {key}")
        return creator(*args, **kwargs)

    def keys(self) -> List[str]:
        return sorted(self._creators)

    def __contains__(self, key: str) -> bool:
        return key in self._creators
