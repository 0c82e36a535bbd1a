"""
API Handlers Package.

Contains exception handlers and the background run worker.
"""
