from enum import Enum


class Assumption(Enum):
    """
    Conditions certified by the verifiers, named as they appear in run reports
    """
    DRIFT = "drift"
    LONG_TIME_CONTRACTIVITY = "long_time_contractivity"
    MINORIZATION = "minorization"
    SMALLNESS = "smallness"
    SMALL_SET = "small_set"
    MULTISTEP_DRIFT = "multistep_drift"
    ONE_STEP_BOUND = "one_step_bound"
    STABILITY = "stability"
    DISSIPATIVITY = "dissipativity"
    GROWTH = "growth"
    SERVICE_BOUND = "service_bound"
    LLN_BOUND = "lln_bound"


class McreLabException(Exception):
    pass


class ValidationException(McreLabException):
    pass


class ConfigException(ValidationException):
    def __init__(self, message, line=None, column=None, key_path=None):
        """
        :param message: Description of the problem
        :type message: str
        :param line: 1-based line of the offending node, if known
        :type line: int | None
        :param column: 1-based column of the offending node, if known
        :type column: int | None
        :param key_path: Dotted key path inside the config tree, if known
        :type key_path: str | None
        """
        super(ConfigException, self).__init__(message)
        self._message = message
        self._line = line
        self._column = column
        self._key_path = key_path

    @property
    def line(self):
        return self._line

    @property
    def column(self):
        return self._column

    @property
    def key_path(self):
        return self._key_path

    def __str__(self):
        where = []
        if self._line is not None:
            where.append("line {}, column {}".format(self._line, self._column))
        if self._key_path:
            where.append(self._key_path)
        if where:
            return "{} ({})".format(self._message, "; ".join(where))
        return self._message


class WindowRangeException(McreLabException):
    pass


class NumericException(McreLabException):
    def __init__(self, message, offending=None):
        """
        :type message: str
        :param offending: Inputs or states that produced the failure
        """
        super(NumericException, self).__init__(message)
        self._offending = offending

    @property
    def offending(self):
        return self._offending


class AssumptionFailure(McreLabException):
    def __init__(self, assumption, message):
        """
        :type assumption: Assumption
        :type message: str
        """
        super(AssumptionFailure, self).__init__(message)
        self._assumption = assumption

    @property
    def assumption(self):
        return self._assumption

    def __str__(self):
        return "{}: {}".format(self._assumption.value, super(AssumptionFailure, self).__str__())


class ContractivityViolation(AssumptionFailure):
    def __init__(self, message):
        super(ContractivityViolation, self).__init__(Assumption.LONG_TIME_CONTRACTIVITY, message)


class ModelInfeasibleException(AssumptionFailure):
    pass


class LambdaTooLargeException(ModelInfeasibleException):
    pass


class InconclusiveStabilityException(AssumptionFailure):
    def __init__(self, message, ci_low, ci_high):
        super(InconclusiveStabilityException, self).__init__(Assumption.STABILITY, message)
        self._ci = (ci_low, ci_high)

    @property
    def ci(self):
        return self._ci


class InsufficientDataException(McreLabException):
    pass


class UnsupportedException(McreLabException):
    pass


class FunctionalBoundException(AssumptionFailure, ValidationException):
    def __init__(self, message):
        super(FunctionalBoundException, self).__init__(Assumption.LLN_BOUND, message)
