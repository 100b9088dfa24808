"""
Exception hierarchy for divmeasure.
Library code raises these; the runner turns them into report entries.
"""


class DivMeasureError(Exception):
    """Base class for every error raised by the toolkit."""


class ConfigError(DivMeasureError, ValueError):
    def __init__(self, message, section=None, field=None, line=None):
        self.section = section
        self.field = field
        self.line = line
        where = []
        if section:
            where.append(f"[{section}]")
        if field:
            where.append(field)
        if line is not None:
            where.append(f"line {line}")
        prefix = f"{' '.join(where)}: " if where else ""
        super().__init__(f"{prefix}{message}")


# grid
class BoundsError(DivMeasureError):
    pass


class ResolutionError(DivMeasureError):
    pass


# geometry
class DegenerateLevel(DivMeasureError):
    pass


class NoRegularLevel(DivMeasureError):
    pass


# measures
class AtomOnBoundary(DivMeasureError):
    pass


class AtomRejected(DivMeasureError):
    pass


# fields
class DivergenceMismatch(DivMeasureError):
    pass


class PartitionError(DivMeasureError):
    pass


class SupBoundExceeded(DivMeasureError):
    pass


# traces
class FatnessViolated(DivMeasureError):
    def __init__(self, message, witness=None):
        self.witness = witness
        super().__init__(message)


class InclusionFailed(DivMeasureError):
    pass


# flux
class UnknownFace(DivMeasureError, KeyError):
    def __init__(self, face):
        self.face = face
        super().__init__(f"face {face} is not in the flux table")

    def __str__(self):
        return self.args[0]


class AxiomViolation(DivMeasureError):
    def __init__(self, axiom, witness, detail=""):
        self.axiom = axiom
        self.witness = witness
        msg = f"Cauchy flux axiom ({axiom}) violated at {witness}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


# conservation
class NonConvexUnsupported(DivMeasureError):
    pass


class LaxViolation(DivMeasureError):
    def __init__(self, witness):
        self.witness = witness
        super().__init__(
            f"Lax entropy inequality violated: {witness.get('pair')} on box "
            f"{witness.get('box')} gives {witness.get('value'):+.12g}"
        )
