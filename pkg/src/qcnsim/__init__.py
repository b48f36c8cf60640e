"""Open-system simulation of a V-type emitter coupled to two driven cavities.

The emitter's two transitions each couple to one cavity, so light in one
cavity changes the transmission of the other. Modules:

``hilbert``
    tensor-product layouts, sparse operators, density matrices
``model``
    parameters, Hamiltonians, dissipators and the cascaded pulse source
``dynamics``
    steady state, time evolution and transmission metrics
``analytic``
    closed-form resonant steady state
``experiments``
    figure scenarios, truncation control, outputs, command line
"""

__version__ = "0.1.0"
