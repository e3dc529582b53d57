"""Exception hierarchy shared by every layer of the pipeline."""


class BpelCheckError(Exception):
    """Base class for all errors raised by this package."""


# -- nets -------------------------------------------------------------------

class NetError(BpelCheckError):
    pass


class MalformedNet(NetError):
    pass


class NoUniqueSource(NetError):
    pass


class NoUniqueSink(NetError):
    pass


class TransitionNotCovered(NetError):
    def __init__(self, transition):
        super().__init__(f"transition {transition!r} lies on no source-to-sink path")
        self.transition = transition


class CyclicNet(NetError):
    pass


class UnknownTransition(NetError):
    pass


class NotEnabled(NetError):
    pass


class StateBudgetExceeded(NetError):
    pass


# -- BPEL -------------------------------------------------------------------

class BpelError(BpelCheckError):
    pass


class XmlSyntax(BpelError):
    pass


class UnsupportedElement(BpelError):
    def __init__(self, name, what="element"):
        super().__init__(f"unsupported {what} <{name}>" if what == "element"
                         else f"unsupported {what} {name!r}")
        self.name = name


class DuplicateOperation(BpelError):
    def __init__(self, name):
        super().__init__(f"operation {name!r} occurs more than once")
        self.name = name


# -- policies and formulas --------------------------------------------------

class PolicyError(BpelCheckError):
    pass


class HierarchyNotAntisymmetric(PolicyError):
    def __init__(self, cycle):
        super().__init__("role hierarchy is not antisymmetric: " + " >= ".join(cycle))
        self.cycle = tuple(cycle)


class UndeclaredConstant(PolicyError):
    def __init__(self, name, sort=None):
        where = f" of sort {sort}" if sort else ""
        super().__init__(f"undeclared constant {name!r}{where}")
        self.name = name


class UnknownAction(PolicyError):
    pass


class UnboundAction(PolicyError):
    pass


class FormulaSyntax(BpelCheckError):
    pass


class NonUnaryAtom(BpelCheckError):
    pass


class GroundingBudgetExceeded(BpelCheckError):
    pass


# -- engine -----------------------------------------------------------------

class NodeBudgetExceeded(BpelCheckError):
    def __init__(self, budget, count):
        super().__init__(f"symbolic tree exceeded node budget {budget} ({count} nodes materialized)")
        self.budget = budget
        self.count = count


class ReplayStepFailed(BpelCheckError):
    def __init__(self, index, reason):
        super().__init__(f"witness step {index}: {reason}")
        self.index = index
        self.reason = reason


# -- external solver --------------------------------------------------------

class SolverError(BpelCheckError):
    pass


class SolverNotFound(SolverError):
    pass


class SolverCrashed(SolverError):
    def __init__(self, returncode, stderr):
        super().__init__(f"solver exited with {returncode}: {stderr[:200]}")
        self.returncode = returncode
        self.stderr = stderr


class SmtParseError(SolverError):
    pass
