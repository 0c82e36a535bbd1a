"""
API Routes Package.

Contains route handlers for the run endpoints.
"""
