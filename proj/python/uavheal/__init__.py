"""Python access to the uavheal core: link model, swarm graphs, the graph
contraction, one-off healing and the experiment runners."""

import json as _json

from ._uavheal import (
    ChannelParams,
    UavhealError,
    cen_heal,
    clec_satisfied,
    cluster_count,
    cr_mgc_heal,
    gco_iterate,
    laplacian,
    log_bessel_i0,
    max_link_distance,
    min_virtual_distance,
    received_power_dBm,
    topology_from_csv,
    topology_to_csv,
    virtual_distance,
    zero_eig_multiplicity,
)

EXPERIMENTS = ("meta-train", "sweep-c", "sweep-eta", "sweep-eps", "heal-oneoff", "sim-general", "bench")


def run_experiment(name, config=None, store=None):
    """Run one experiment and return {file name: contents}.

    `config` uses the same keys as the CLI config file. `store` is a path to a
    parameter store written by meta-train.
    """
    text = _json.dumps(config) if config else ""
    return _run_experiment(name, text, store)


from ._uavheal import _run_experiment  # noqa: E402

__all__ = [
    "ChannelParams",
    "UavhealError",
    "EXPERIMENTS",
    "cen_heal",
    "clec_satisfied",
    "cluster_count",
    "cr_mgc_heal",
    "gco_iterate",
    "laplacian",
    "log_bessel_i0",
    "max_link_distance",
    "min_virtual_distance",
    "received_power_dBm",
    "run_experiment",
    "topology_from_csv",
    "topology_to_csv",
    "virtual_distance",
    "zero_eig_multiplicity",
]
