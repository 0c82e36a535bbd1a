"""
API Middleware Package.

Contains the request logging middleware.
"""
