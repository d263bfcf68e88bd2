"""Experiment design and effect estimation on marketplace graphs under
network interference.

The heavy lifting lives in the compiled extension ``_oasis``; this package
re-exports its surface. Installed wheels carry the extension inside the
package; in-tree builds leave it next to the build directory, hence the
fallback import.
"""

try:
    from . import _oasis as _impl
except ImportError:  # in-tree build: extension on sys.path, not in the package
    import _oasis as _impl

Design = _impl.Design
Graph = _impl.Graph
OasisError = _impl.OasisError
Partition = _impl.Partition
TreatmentSet = _impl.TreatmentSet
assemble_design = _impl.assemble_design
compute_boost_factors = _impl.compute_boost_factors
generate_attributes = _impl.generate_attributes
generate_clustered_graph = _impl.generate_clustered_graph
ground_truth = _impl.ground_truth
load = _impl.load
run_estimate = _impl.run_estimate
sample_partition = _impl.sample_partition
save = _impl.save
simulate = _impl.simulate
solve_qp = _impl.solve_qp
validate = _impl.validate

__all__ = [
    "Design",
    "Graph",
    "OasisError",
    "Partition",
    "TreatmentSet",
    "assemble_design",
    "compute_boost_factors",
    "generate_attributes",
    "generate_clustered_graph",
    "ground_truth",
    "load",
    "run_estimate",
    "sample_partition",
    "save",
    "simulate",
    "solve_qp",
    "validate",
]
