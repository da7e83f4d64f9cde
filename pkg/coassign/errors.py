"""Exception hierarchy shared by every coassign sub-package."""


class CoAssignError(Exception):
    """Base class for all coassign errors."""


class InvalidInputError(CoAssignError, ValueError):
    """Input data violates a documented precondition."""


class ConfigError(CoAssignError, ValueError):
    """A configuration value is unknown or out of range."""


class SceneFileError(InvalidInputError):
    """A scene file does not match the expected schema.

    Args:
        message: What is wrong.
        image_id: Id of the offending image, when known.
        field: Dotted path of the offending field, when known.
    """

    def __init__(self, message: str, image_id=None, field: str = None):
        self.image_id = image_id
        self.field = field
        where = []
        if image_id is not None:
            where.append(f'image {image_id}')
        if field:
            where.append(f'field {field}')
        prefix = f'{", ".join(where)}: ' if where else ''
        super().__init__(f'{prefix}{message}')
