"""
TWIST-Recon application package
"""
