"""
Exception hierarchy shared by every tilelab package
"""


class TileLabError(Exception):
    """Base error; exit_code is what the CLI returns for it"""

    exit_code = 1

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class ConfigValidationError(TileLabError):
    """Invalid grid, mask, shape, weight or argument"""

    exit_code = 1


class StorageError(TileLabError):
    """Unreadable, unwritable or corrupt file"""

    exit_code = 2
