# Copyright 2026 The tilegene Authors
# SPDX-License-Identifier: Apache-2.0
import os
import shutil
import subprocess

import pytest


@pytest.fixture
def cli_binary():
    path = os.environ.get("TGTEST_CLI") or shutil.which("tilegene")
    if not path:
        pytest.skip("tilegene executable not available")
    return path


@pytest.fixture
def run_cli(cli_binary):
    def run(*args):
        return subprocess.run([cli_binary, *map(str, args)], capture_output=True, text=True)

    return run
