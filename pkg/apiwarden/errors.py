class ApiWardenError(Exception):
    pass


class SchemaError(ApiWardenError):
    def __init__(self, message: str, location: str = "") -> None:
        super().__init__(f"{message} (at {location})" if location else message)
        self.location = location


class UnsupportedVersionError(SchemaError):
    pass


class EndpointNotFoundError(SchemaError):
    pass


class AuthConfigError(ApiWardenError):
    pass


class LoginError(ApiWardenError):
    pass


class TransportError(ApiWardenError):
    pass


class CompositionError(ApiWardenError):
    pass


class InputGenerationError(ApiWardenError):
    pass


class CorpusError(ApiWardenError):
    pass


class PlanError(ApiWardenError):
    pass


class PayloadError(ApiWardenError):
    pass


class ReportError(ApiWardenError):
    pass


class FixtureError(ApiWardenError):
    pass
