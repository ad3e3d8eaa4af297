import enum


class TypeTag(str, enum.Enum):
    """
    Enum of the parameter types a service descriptor may declare.

    Values:
        STRING: UTF-8 text
        INT: integer (booleans are not integers here)
        DECIMAL: any JSON number
        BOOL: true / false
    """

    STRING = "string"
    INT = "int"
    DECIMAL = "decimal"
    BOOL = "bool"


class ServiceState(str, enum.Enum):
    """
    Enum representing whether a hosted service is loaded and invokable.

    Values:
        DEACTIVATED: Service sits in the repository, not loaded
        ACTIVATED: Service is routed by the peer's active-service table

    Ordering is DEACTIVATED < ACTIVATED (not the alphabetical str order).
    """

    DEACTIVATED = "deactivated"
    ACTIVATED = "activated"

    @property
    def rank(self) -> int:
        return 1 if self is ServiceState.ACTIVATED else 0

    def __lt__(self, other):
        if isinstance(other, ServiceState):
            return self.rank < other.rank
        return NotImplemented

    def __le__(self, other):
        if isinstance(other, ServiceState):
            return self.rank <= other.rank
        return NotImplemented

    def __gt__(self, other):
        if isinstance(other, ServiceState):
            return self.rank > other.rank
        return NotImplemented

    def __ge__(self, other):
        if isinstance(other, ServiceState):
            return self.rank >= other.rank
        return NotImplemented


class ErrorCode(str, enum.Enum):
    UNKNOWN_SERVICE = "UNKNOWN_SERVICE"
    PLAN_STEP_UNSATISFIED = "PLAN_STEP_UNSATISFIED"
    PEER_UNREACHABLE = "PEER_UNREACHABLE"
    REMOTE_ERROR = "REMOTE_ERROR"
    INJECTION_FAILED = "INJECTION_FAILED"
    SERVICE_FAULT = "SERVICE_FAULT"
    NO_CANDIDATE_PLAN = "NO_CANDIDATE_PLAN"
    BAD_REQUEST = "BAD_REQUEST"


class WireStatus(enum.IntEnum):
    OK = 200
    BAD_REQUEST = 400
    NOT_FOUND = 404
    SERVER_ERROR = 500


class Method(str, enum.Enum):
    GET = "GET"
    POST = "POST"


class UpsertOutcome(str, enum.Enum):
    INSERTED = "inserted"
    UPDATED = "updated"
    IGNORED_STALE = "ignored_stale"


class GossipOutcome(str, enum.Enum):
    ABSORBED = "absorbed"
    ABSORBED_AND_FORWARDED = "absorbed_and_forwarded"
    DUPLICATE_DROPPED = "duplicate_dropped"


# Wire status for each error code; anything unlisted is a server error.
ERROR_STATUS = {
    ErrorCode.BAD_REQUEST: WireStatus.BAD_REQUEST,
    ErrorCode.UNKNOWN_SERVICE: WireStatus.NOT_FOUND,
    ErrorCode.NO_CANDIDATE_PLAN: WireStatus.NOT_FOUND,
}

EXIT_OK = 0
EXIT_ASSERTION_FAILED = 1
EXIT_USAGE = 2

# CLI exit status per error code
EXIT_CODES = {
    ErrorCode.NO_CANDIDATE_PLAN: 10,
    ErrorCode.PLAN_STEP_UNSATISFIED: 11,
    ErrorCode.PEER_UNREACHABLE: 12,
    ErrorCode.REMOTE_ERROR: 13,
    ErrorCode.UNKNOWN_SERVICE: 14,
    ErrorCode.INJECTION_FAILED: 15,
    ErrorCode.SERVICE_FAULT: 16,
    ErrorCode.BAD_REQUEST: 17,
}
