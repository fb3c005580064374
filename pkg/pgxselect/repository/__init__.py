"""File persistence for datasets, draws and run manifests."""
