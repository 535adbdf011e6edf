"""Exact counts, tilted processes, samplers and effective bounds for low-rank assemblies."""

__version__ = "0.1.0"

from .assembly import (  # noqa: E402
    GRAPHS,
    MAPPINGS,
    PERMUTATIONS,
    SET_PARTITIONS,
    AssemblySpec,
    builtin,
    egf_M,
    from_json,
    lambda_i,
    load_assembly_file,
    m_from_p,
    radius,
    rho,
)
from .counting import (  # noqa: E402
    ExactLaw,
    PartitionType,
    count_N,
    count_p,
    count_pnk,
    enumerate_types,
    exact_component_law,
    low_rank_law,
)
from .errors import *  # noqa: E402,F401,F403
