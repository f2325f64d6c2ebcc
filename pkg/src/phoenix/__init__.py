"""Behavioral-signature monitoring and synthesis for cellular control-plane traces.

Subpackages:

* :mod:`phoenix.pltl` — past-time LTL formulas, semantics, step monitor
* :mod:`phoenix.automata` — DFA / Mealy-machine signatures and runs
* :mod:`phoenix.learn_automata` — RPNI learning from informed samples
* :mod:`phoenix.sat` — embedded CDCL satisfiability solver, DIMACS I/O
* :mod:`phoenix.learn_pltl` — SAT-based minimal PLTL signature synthesis
* :mod:`phoenix.traces` — event/session/trace model, file formats, generators
* :mod:`phoenix.catalog` — built-in attack-variant catalog and benign seeds
* :mod:`phoenix.harness` — signature database, pipeline, metrics, benchmarks
"""

__version__ = "0.1.0"
