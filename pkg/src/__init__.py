"""Binary sparse recovery experiments: LP relaxations, uniqueness certificates and sweeps."""

__version__ = "0.1.0"
