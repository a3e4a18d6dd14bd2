"""Exception hierarchy shared by the model modules."""


class ModelError(Exception):
    """Base class for model/domain errors (CLI exit code 2)."""


class TopologyError(ModelError, ValueError):
    pass


class StateIndexError(ModelError, IndexError):
    pass


class BathError(ModelError, ValueError):
    pass


class ParameterError(ModelError, ValueError):
    pass


class DegenerateEnsembleError(ModelError):
    pass


class CrossoverNotFound(ModelError):
    pass


class DatasetError(ModelError, ValueError):
    pass
