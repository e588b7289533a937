"""Token attribution and faithfulness evaluation for embedding text classifiers."""
__version__ = "0.1.0"
