#!/usr/bin/env python3
"""
SkiTrack 命令行启动文件

用法: python cli.py <synth-gen|run|eval|compare|check-client> [参数]
"""

import sys

from app.cli import main

if __name__ == "__main__":
    sys.exit(main())
