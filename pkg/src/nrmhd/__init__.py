"""Pseudo-spectral verification harness for viscous, non-resistive MHD on T^3."""
