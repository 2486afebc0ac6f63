"""Exception hierarchy shared across the harness."""


class GraspBenchError(Exception):
    """Base class for all harness errors."""


# --- scene model ---

class CycleError(GraspBenchError):
    """The pruned occlusion graph contains a directed cycle."""

    def __init__(self, cycle):
        self.cycle = list(cycle)
        super().__init__(f"pruned occlusion graph is cyclic: {' -> '.join(map(str, self.cycle))}")


class UnknownTarget(GraspBenchError):
    """Referenced object id is not live in the scene state."""


# --- dataset ---

class ParseError(GraspBenchError):
    """Malformed input file (bad JSON, bad mask encoding, missing field)."""


class ValidationError(GraspBenchError):
    """A well-formed file breaches a model invariant."""


class InsufficientPool(GraspBenchError):
    """A difficulty cell has fewer eligible (scene, target) pairs than requested."""

    def __init__(self, cell, pool_size, requested):
        self.cell = cell
        self.pool_size = pool_size
        self.requested = requested
        super().__init__(
            f"cell {cell}: only {pool_size} eligible pairs, need {requested}"
        )


class UnknownScenario(GraspBenchError):
    """Instruction row references a (scene_id, target_id) with no scenario."""


class EmptyInstruction(GraspBenchError):
    """Instruction text is empty after whitespace trimming."""


# --- prompting ---

class OutOfBounds(GraspBenchError):
    """Keypoint falls outside the image."""


class NoDecision(GraspBenchError):
    """Reasoner reply contains no parsable decision object."""


class UnknownMark(GraspBenchError):
    """Decision references a mark id absent from the registry."""


# --- localization ---

class EmptyScene(GraspBenchError):
    """No live objects to localize."""


class TransportError(GraspBenchError):
    """Network-level failure talking to a remote endpoint (after retries)."""


class ProtocolError(GraspBenchError):
    """Remote endpoint replied, but the reply is unparsable."""


# --- reasoning ---

class FixtureExhausted(GraspBenchError):
    """Scripted reasoner ran out of fixture entries."""


# --- geometry ---

class MissingIntrinsics(GraspBenchError):
    """Operation requires camera intrinsics the scene does not carry."""


class NonpositiveDepth(GraspBenchError):
    """Depth value must be strictly positive."""


class DegenerateMask(GraspBenchError):
    """Mask has too few valid-depth pixels for a grasp estimate."""


# --- metrics ---

class DimensionMismatch(GraspBenchError):
    """Masks being compared have different shapes."""


class EmptyInput(GraspBenchError):
    """Metric requires at least one record."""


class MissingFields(GraspBenchError):
    """Records lack the fields a metric needs."""


# --- episode engine / config ---

class ConfigError(GraspBenchError):
    """Incompatible or invalid harness configuration."""
