"""Schwarz-Christoffel maps from multiply connected circular domains.

Modules: ``domain`` (circular domains and Mobius maps), ``schottky`` (group
words), ``prime`` (the prime function), ``slitmaps`` (canonical slit maps),
``prefactor`` (gamma points and prefactors), ``scmap`` (the mapping, its
integration and boundary tracing) and ``cli``.
"""

__version__ = "0.1.0"
