import math
from typing import Any, Optional, Sequence, Tuple

from .errors import ValidationError

_MISSING = object()


class FieldError(ValidationError):
    """Raised when a value cannot be stored in a record field."""
    pass


class Field:
    """Base field descriptor and metadata container"""
    def __init__(self, *, default: Any = _MISSING, nullable: bool = False, doc: Optional[str] = None):
        self.name: Optional[str] = None   # set by __set_name__
        self.default = default
        self.nullable = nullable
        self.doc = doc
        # note: descriptor stores instance values in instance.__dict__[self.name]

    def __set_name__(self, owner, name):
        self.name = name

    def __get__(self, instance, owner):
        if instance is None:
            # accessed as MyRecord.field -> return field object for introspection
            return self
        return instance.__dict__.get(self.name)

    def __set__(self, instance, value):
        if instance.__dict__.get("_frozen", False):
            raise FieldError(f"Field '{self.name}' is read-only once the record is built")
        if value is None:
            if not self.nullable:
                raise FieldError(f"Field '{self.name}' cannot be None")
            instance.__dict__[self.name] = None
            return
        try:
            value = self.to_python(value)
        except (TypeError, ValueError) as e:
            raise FieldError(f"Field '{self.name}': {e}") from e
        self.validate(value)
        instance.__dict__[self.name] = value

    @property
    def has_default(self) -> bool:
        return self.default is not _MISSING

    def get_default(self):
        return self.default() if callable(self.default) else self.default

    # conversion hooks (override in subclasses)
    def to_python(self, value):
        """Convert raw (JSON/CLI) value -> Python value (default noop)."""
        return value

    def to_json(self, value):
        """Convert Python value -> JSON-ready value (default noop)."""
        return value

    def validate(self, value) -> None:
        """Check range/choice constraints on an already converted value."""
        return None


class IntegerField(Field):
    def __init__(self, *, min_value: Optional[int] = None, max_value: Optional[int] = None, **kwargs):
        super().__init__(**kwargs)
        self.min_value = min_value
        self.max_value = max_value

    def to_python(self, value):
        if isinstance(value, bool):
            raise TypeError("expected an integer, got a boolean")
        if isinstance(value, float) and not value.is_integer():
            raise ValueError(f"expected an integer, got {value!r}")
        return int(value)

    def validate(self, value):
        if self.min_value is not None and value < self.min_value:
            raise FieldError(f"Field '{self.name}' must be >= {self.min_value}, got {value}")
        if self.max_value is not None and value > self.max_value:
            raise FieldError(f"Field '{self.name}' must be <= {self.max_value}, got {value}")


class FloatField(Field):
    def __init__(
        self,
        *,
        min_value: Optional[float] = None,
        max_value: Optional[float] = None,
        exclusive_min: bool = False,
        exclusive_max: bool = False,
        **kwargs,
    ):
        super().__init__(**kwargs)
        self.min_value = min_value
        self.max_value = max_value
        self.exclusive_min = exclusive_min
        self.exclusive_max = exclusive_max

    def to_python(self, value):
        value = float(value)
        if not math.isfinite(value):
            raise ValueError(f"expected a finite number, got {value!r}")
        return value

    def validate(self, value):
        lo, hi = self.min_value, self.max_value
        if lo is not None and (value < lo or (self.exclusive_min and value == lo)):
            op = ">" if self.exclusive_min else ">="
            raise FieldError(f"Field '{self.name}' must be {op} {lo}, got {value}")
        if hi is not None and (value > hi or (self.exclusive_max and value == hi)):
            op = "<" if self.exclusive_max else "<="
            raise FieldError(f"Field '{self.name}' must be {op} {hi}, got {value}")


class TextField(Field):
    def __init__(self, *, choices: Optional[Sequence[str]] = None, **kwargs):
        super().__init__(**kwargs)
        self.choices = tuple(choices) if choices is not None else None

    def to_python(self, value):
        return str(value)

    def validate(self, value):
        if self.choices is not None and value not in self.choices:
            raise FieldError(f"Field '{self.name}' must be one of {list(self.choices)}, got {value!r}")


class BooleanField(Field):
    def to_python(self, value):
        if isinstance(value, str):
            lowered = value.strip().lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"cannot read {value!r} as a boolean")
        return bool(value)


class VectorField(Field):
    """Fixed-length tuple of floats, e.g. a position in meters."""
    def __init__(self, *, length: int = 3, **kwargs):
        super().__init__(**kwargs)
        self.length = length

    def to_python(self, value):
        vec = tuple(float(v) for v in value)
        if len(vec) != self.length:
            raise ValueError(f"expected {self.length} components, got {len(vec)}")
        if not all(math.isfinite(v) for v in vec):
            raise ValueError("components must be finite")
        return vec

    def to_json(self, value):
        return list(value)


class PolylineField(Field):
    """Tuple of fixed-length points (waypoints)."""
    def __init__(self, *, dims: int = 3, **kwargs):
        kwargs.setdefault("default", tuple)
        super().__init__(**kwargs)
        self.dims = dims

    def to_python(self, value) -> Tuple[Tuple[float, ...], ...]:
        points = []
        for point in value:
            p = tuple(float(v) for v in point)
            if len(p) != self.dims:
                raise ValueError(f"waypoints need {self.dims} components, got {len(p)}")
            points.append(p)
        return tuple(points)

    def to_json(self, value):
        return [list(p) for p in value]


class MappingField(Field):
    """Free-form JSON object stored as a plain dict."""
    def __init__(self, **kwargs):
        kwargs.setdefault("default", dict)
        super().__init__(**kwargs)

    def to_python(self, value):
        return dict(value)

    def to_json(self, value):
        return dict(value)
