"""Node anomaly detection via ego-graph reconstruction under a graph diffusion model.

Train denoising score networks on the ego-graphs of an attributed network, then
score each node by how poorly its neighborhood survives a corrupt-and-reconstruct
round trip. Higher scores mean more anomalous.

Typical use:

    import egodiff

    net = egodiff.synthetic(num_nodes=400, seed=7)
    model = egodiff.train(net, epochs=30, seed=7)
    scores = model.score(net, seed=7)
    print(egodiff.roc_auc(scores, net.labels))
"""

from ._egodiff import (
    ContractError,
    DataError,
    Model,
    Network,
    NormalizationError,
    NumericalError,
    average_precision,
    extract_ego,
    load_bundle,
    load_model,
    normalized_energy,
    recall_at_k,
    roc_auc,
    save_bundle,
    synthetic,
    train,
)

__all__ = [
    "ContractError",
    "DataError",
    "Model",
    "Network",
    "NormalizationError",
    "NumericalError",
    "average_precision",
    "extract_ego",
    "load_bundle",
    "load_model",
    "normalized_energy",
    "recall_at_k",
    "roc_auc",
    "save_bundle",
    "synthetic",
    "train",
]
