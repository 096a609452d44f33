"""Exception types shared across the toolkit."""


class ZrkitError(Exception):
    """Domain error: the inputs are readable but violate a contract."""


class FormatError(ZrkitError):
    """A file exists but its contents are malformed."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
