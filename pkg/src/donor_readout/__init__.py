"""Simulation toolkit for optical readout of shallow-donor states in GaAs.

Submodules: :mod:`levels` (donor energies), :mod:`dynamics` (rate
equations), :mod:`spectra` (PL/RELS synthesis), :mod:`observables`
(modulation, saturation fits, heating), :mod:`readout` (Monte Carlo photon
counting) and :mod:`cli`.
"""
__version__ = "0.1.0"
