"""Exception hierarchy shared across the package."""


class GrnForgeError(Exception):
    """Base class for all package errors."""


class InputError(GrnForgeError):
    """Malformed or unusable input data."""


class MissingValue(InputError):
    def __init__(self, row, column):
        self.row = row
        self.column = column
        super().__init__(f"missing/non-numeric value at row {row}, column {column}")


class DuplicateGene(InputError):
    def __init__(self, gene_id):
        self.gene_id = gene_id
        super().__init__(f"duplicate gene id {gene_id!r}")


class ConstantGene(GrnForgeError):
    def __init__(self, gene_id=None):
        self.gene_id = gene_id
        super().__init__(f"zero-variance expression vector{f' for {gene_id!r}' if gene_id else ''}")


class DegenerateNetwork(GrnForgeError):
    """Network too small for the requested statistic."""


class NotAdjacent(GrnForgeError):
    """Edge pair does not share an endpoint."""


class EmptyGraph(GrnForgeError):
    """Operation requires at least one edge."""


class ConfigError(GrnForgeError):
    """Invalid configuration value."""


class CollinearParents(GrnForgeError):
    """Rank-deficient parent design matrix; the move is invalid."""


class EmptySets(GrnForgeError):
    """Jaccard of two empty sets is undefined."""


class UniverseMismatch(GrnForgeError):
    """Predicted and true graphs are over different node sets."""


class InvariantViolation(GrnForgeError):
    """An internal invariant failed; indicates a bug."""
