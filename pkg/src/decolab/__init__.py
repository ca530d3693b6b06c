"""decolab: a desk-scale numerical laboratory for decoherence physics.

Subpackages cover labeled tensor-product linear algebra (:mod:`~decolab.hilbert`),
von Neumann measurement chains (:mod:`~decolab.measurement`), the exactly
solvable spin-bath dephasing model (:mod:`~decolab.spinbath`), pointer-basis
selection (:mod:`~decolab.einselection`), envariance and the Born rule
(:mod:`~decolab.envariance`), consistent histories (:mod:`~decolab.histories`),
spontaneous-collapse and pilot-wave dynamics (:mod:`~decolab.dynamics`), and a
deterministic scenario runner (:mod:`~decolab.cli`).
"""

__version__ = "0.1.0"
