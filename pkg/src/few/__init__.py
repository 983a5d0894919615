"""Floating entanglement witness measure: GA + quasi-Newton estimation of E(rho)."""
