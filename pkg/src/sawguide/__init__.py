"""Design and characterization tools for piezoelectric phononic waveguides."""

__version__ = "0.1.0"
