"""vicorpus: build visual corpora from HTML with hierarchical text annotations."""

__version__ = "0.1.0"

GENERATOR_VERSION = f"vicorpus-{__version__}"
