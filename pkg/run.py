#!/usr/bin/env python3
"""
Main entry point for the Comfort Motion Planner
"""

import sys

from comfort_planner.main import main

if __name__ == "__main__":
    sys.exit(main())
