"""
Visualization Module

This module provides the Visualizer class for plotting benchmark reports.

Classes:
    Visualizer: Handles the visualization of benchmark results.

Usage Example:
    visualizer = Visualizer()
    visualizer.rotation_error_cdf(report, "bench.png")
"""

import logging
import os

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
import numpy as np

from modules.scenegen.Benchmark import Report
from modules.scenegen.Metrics import RECALL_ROTATION_DEG

logger = logging.getLogger(__name__)


class Visualizer():
    def __init__(self, max_rotation_error: float = 30.0):
        self.max_rotation_error = max_rotation_error

    def rotation_error_cdf(self, report: Report, filename: str) -> None:
        """
        Plots, per correspondence mode, the share of scenes registered below a rotation error.

        Failed scenes never reach the curve, so a mode with failures tops out below 1.

        :param report: Benchmark report.
        :type report: Report
        :param filename: Output image path.
        :type filename: str
        """
        frame = report.to_frame()

        plt.clf()
        for mode in report.modes:
            group = frame[frame['mode'] == mode]
            if group.empty:
                continue
            errors = np.sort(group['rotation_error'].dropna().to_numpy(dtype=float))
            share = np.arange(1, errors.size + 1) / len(group)
            plt.step(np.concatenate([[0.0], errors]), np.concatenate([[0.0], share]), where='post', label=mode)

        plt.axvline(RECALL_ROTATION_DEG, color='grey', linestyle=':')
        plt.xlim(0.0, self.max_rotation_error)
        plt.ylim(0.0, 1.0)
        plt.title("Rotation error CDF")
        plt.xlabel("Rotation error (in degrees)")
        plt.ylabel("Share of scenes")
        plt.legend()

        folder = os.path.dirname(filename)
        if folder:
            os.makedirs(folder, exist_ok=True)
        plt.savefig(filename)
        plt.close()
        logger.info(f"Rotation error CDF written to {filename}")
