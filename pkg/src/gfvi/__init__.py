"""Exchangeable distinguished coalescents and their dual measure-valued flows.

Simulation plus exact desk-scale verification: partition coagulation
algebra, paint-boxes, event-driven flows, a typed lookdown population,
finite-state rate matrices and semigroups, duality checks, and
coming-down-from-infinity diagnostics.
"""

from .partitions import (
    DistinguishedPartition,
    MassPartition,
    alpha,
    coag,
    distance,
    kingman,
    paintbox_prob,
    paintbox_sample,
    restrict,
    singletons,
)
from .measures import CoagulationMeasure
from .functionals import DiscreteLaw, IndicatorFactor, MomentFunctional, PolyFactor
from .flows import EventLog, simulate_events, backward_state, forward_state

__all__ = [
    "DistinguishedPartition",
    "MassPartition",
    "CoagulationMeasure",
    "DiscreteLaw",
    "MomentFunctional",
    "PolyFactor",
    "IndicatorFactor",
    "EventLog",
    "singletons",
    "coag",
    "restrict",
    "alpha",
    "distance",
    "kingman",
    "paintbox_sample",
    "paintbox_prob",
    "simulate_events",
    "backward_state",
    "forward_state",
]

__version__ = "0.1.0"
