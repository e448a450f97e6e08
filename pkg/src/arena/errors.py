"""Exception types shared across the platform."""


class ArenaError(Exception):
    """Base class for all platform errors."""


class ParseError(ArenaError):
    """Input bytes could not be parsed at all."""


class ValidationError(ArenaError):
    """Parsed input violates a schema or world invariant."""


class UnknownInstance(ArenaError):
    pass


class UnknownClass(ArenaError):
    pass


class UnknownReference(ArenaError):
    """Goal condition references something not in the world."""


class UnknownViewpoint(ArenaError):
    pass


class UnknownRoom(ArenaError):
    pass


class Unreachable(ArenaError):
    """No path exists between the requested cells."""


class CompileError(ArenaError):
    """Mission cannot be compiled to a planning problem."""


class Unsolvable(ArenaError):
    """Search space exhausted without reaching the goal."""


class BudgetExceeded(ArenaError):
    """Search hit its expansion budget."""


class ReplayDivergence(ArenaError):
    """A recorded or planned step was rejected on replay; always a bug signal."""


class SessionTerminated(ArenaError):
    """Action submitted to a session that already reached a terminal phase."""


class GenerationExhausted(ArenaError):
    """Mission sampler could not place a solvable mission within its retry budget."""


class UnparsableInstruction(ArenaError):
    """Scripted agent could not match an instruction against its grammar."""


class EmptyInput(ArenaError):
    pass


class KindMismatch(ArenaError):
    """IoU requested between a box and a mask."""
