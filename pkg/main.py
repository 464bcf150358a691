#!/usr/bin/env python3
"""Main entry point for photon-trajectories."""

from src.photon_trajectories.cli import main

if __name__ == '__main__':
    main()
