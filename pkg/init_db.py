#!/usr/bin/env python
"""
Script to initialize the metric store tables
"""

import logging

from app.core.config import settings
from app.core.database import init_db

if __name__ == "__main__":
    logging.basicConfig(level=settings.log_level)
    init_db()
