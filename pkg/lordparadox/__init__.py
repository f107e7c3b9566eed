"""Detect and explain Lord's Paradox in two-arm pre/post clustered trials."""
