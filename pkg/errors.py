"""Exception hierarchy shared by every module.

Errors that travel over the wire carry an ``ErrorCode``; purely local
failures (bad config, transport problems) leave ``code`` as None unless a
caller maps them.
"""

from typing import Optional

from constants import ErrorCode


class PeerNetError(Exception):
    code: Optional[ErrorCode] = None

    def __init__(self, detail: str = "", *, index: Optional[int] = None):
        super().__init__(detail or self.__class__.__name__)
        self.detail = detail or self.__class__.__name__
        self.index = index


# --- documents ---


class MalformedDocument(PeerNetError):
    code = ErrorCode.BAD_REQUEST


class SchemaViolation(PeerNetError):
    code = ErrorCode.BAD_REQUEST


# --- transport ---


class TransportError(PeerNetError):
    code = ErrorCode.PEER_UNREACHABLE


class EndpointInUse(TransportError):
    pass


class Unreachable(TransportError):
    pass


class TransportTimeout(TransportError):
    pass


# --- overlay ---


class UnknownLocalService(PeerNetError):
    code = ErrorCode.UNKNOWN_SERVICE


# --- planner / executor ---


class NoCandidatePlan(PeerNetError):
    code = ErrorCode.NO_CANDIDATE_PLAN


class PlanStepUnsatisfied(PeerNetError):
    code = ErrorCode.PLAN_STEP_UNSATISFIED


class PeerUnreachable(PeerNetError):
    code = ErrorCode.PEER_UNREACHABLE


class RemoteError(PeerNetError):
    code = ErrorCode.REMOTE_ERROR

    def __init__(
        self, detail: str = "", *, index: Optional[int] = None, remote_code=None
    ):
        super().__init__(detail, index=index)
        self.remote_code = remote_code


class UnknownService(PeerNetError):
    code = ErrorCode.UNKNOWN_SERVICE


class InvalidArguments(PeerNetError):
    code = ErrorCode.BAD_REQUEST


class ServiceFault(PeerNetError):
    code = ErrorCode.SERVICE_FAULT


class InjectionFailed(PeerNetError):
    code = ErrorCode.INJECTION_FAILED


# --- repository ---


class DuplicateService(PeerNetError):
    pass


class UnknownImplementationKey(PeerNetError):
    pass


class ServiceNotInRepository(PeerNetError):
    code = ErrorCode.UNKNOWN_SERVICE


class NotActive(PeerNetError):
    pass


# --- config ---


class ConfigError(PeerNetError):
    def __init__(self, detail: str, *, field: str = "", line: Optional[int] = None):
        where = f" (line {line})" if line else ""
        prefix = f"{field}: " if field else ""
        super().__init__(f"{prefix}{detail}{where}")
        self.field = field
        self.line = line
