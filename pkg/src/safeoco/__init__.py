"""Safe online convex optimization with multi-point zero-order feedback."""
