from typing import Any, Dict, Mapping

from .errors import ValidationError
from .fields import Field


class RecordError(ValidationError):
    """Base exception for record-related errors."""
    pass


class RecordMeta(type):
    """
        The metaclass that builds our record classes.
        It inspects the class definition (and its bases), finds all the Field
        objects, and stores them in an ordered `_fields` dictionary.
    """

    def __new__(cls, name, bases, attrs):
        """
        Create a new record class.

        Args:
            name (str): The name of the class.
            bases (tuple): The base classes.
            attrs (dict): The attributes of the class.
        """
        if name == "BaseRecord":
            return super().__new__(cls, name, bases, attrs)

        fields: Dict[str, Field] = {}
        for base in reversed(bases):
            fields.update(getattr(base, "_fields", {}))
        fields.update({key: value for key, value in attrs.items() if isinstance(value, Field)})
        if not fields:
            raise RecordError(f"Record {name} declares no fields.")

        attrs["_fields"] = fields
        return super().__new__(cls, name, bases, attrs)


class BaseRecord(metaclass=RecordMeta):
    """
    Base class for validated, immutable parameter records.

    Subclasses declare Field descriptors; construction coerces and checks
    every value, then runs the `validate()` hook for cross-field rules and
    freezes the instance.
    """

    _fields: Dict[str, Field] = {}

    def __init__(self, **kwargs):
        """
        Initialize the record.

        Args:
            **kwargs: Field values; omitted fields take their defaults.

        Raises:
            RecordError: On unknown or missing fields, or a failed check.
        """
        unknown = sorted(set(kwargs) - set(self._fields))
        if unknown:
            raise RecordError(f"{self.__class__.__name__} got unknown field(s): {', '.join(unknown)}")

        for name, field in self._fields.items():
            if name in kwargs:
                value = kwargs[name]
            elif field.has_default:
                value = field.get_default()
            elif field.nullable:
                value = None
            else:
                raise RecordError(f"{self.__class__.__name__} is missing required field '{name}'")
            setattr(self, name, value)

        self.validate()
        self.__dict__["_frozen"] = True

    def validate(self) -> None:
        """Cross-field checks; override in subclasses."""
        return None

    def __setattr__(self, key, value):
        if self.__dict__.get("_frozen", False):
            raise RecordError(f"{self.__class__.__name__} is immutable; use replace()")
        super().__setattr__(key, value)

    def replace(self, **changes) -> "BaseRecord":
        """Return a copy with some fields changed (re-validated)."""
        values = {name: getattr(self, name) for name in self._fields}
        values.update(changes)
        return self.__class__(**values)

    def to_dict(self) -> Dict[str, Any]:
        """JSON-ready mapping of every field."""
        out = {}
        for name, field in self._fields.items():
            value = getattr(self, name)
            out[name] = None if value is None else field.to_json(value)
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "BaseRecord":
        """Build a record from a mapping such as a parsed JSON object."""
        if not isinstance(data, Mapping):
            raise RecordError(f"{cls.__name__} expects an object, got {type(data).__name__}")
        return cls(**dict(data))

    def __eq__(self, other) -> bool:
        if type(other) is not type(self):
            return NotImplemented
        return all(getattr(self, n) == getattr(other, n) for n in self._fields)

    def __hash__(self):
        return hash((self.__class__.__name__,) + tuple(repr(getattr(self, n)) for n in self._fields))

    def __repr__(self) -> str:
        """
        Human-readable representation: <Class(field1=value1, field2=value2)>

        Returns:
            str: The human-readable representation of the record.
        """
        field_values = ", ".join(f"{field}={getattr(self, field)!r}" for field in self._fields)
        return f"<{self.__class__.__name__}({field_values})>"
