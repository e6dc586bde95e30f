#!/usr/bin/env python3
"""
测试项目结构与模块导入
"""

import importlib
import os

import pytest

PROJECT_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))

REQUIRED_FILES = [
    'main.py',
    'requirements.txt',
    'contact_tlamg/__init__.py',
    'contact_tlamg/twolevel.py',
    'contact_tlamg/oracle.py',
    'scripts/logging_config.py',
    'scripts/run_benchmark.py',
    'scripts/run_suite.py',
    'scripts/verify_theory.py',
    'scripts/analyze_logs.py',
    'configs/benchmark/benchmark_config.yml',
    'configs/benchmark/suites.yml',
    'docs/MESH_FORMAT.md',
]

PACKAGE_MODULES = [
    'contact_tlamg.exceptions',
    'contact_tlamg.sparsela',
    'contact_tlamg.meshgen',
    'contact_tlamg.elasticity',
    'contact_tlamg.mortar',
    'contact_tlamg.saddle',
    'contact_tlamg.krylov',
    'contact_tlamg.coarse_amg',
    'contact_tlamg.twolevel',
    'contact_tlamg.baselines',
    'contact_tlamg.oracle',
    'contact_tlamg.system_io',
    'contact_tlamg.benchmark',
]


@pytest.mark.parametrize("file_path", REQUIRED_FILES)
def test_file_structure(file_path):
    """测试文件结构"""
    assert os.path.exists(os.path.join(PROJECT_ROOT, file_path)), f"{file_path} 不存在"


@pytest.mark.parametrize("module", PACKAGE_MODULES)
def test_package_imports(module):
    """测试包内模块导入是否正常"""
    importlib.import_module(module)


@pytest.mark.parametrize("script", ["run_benchmark", "run_suite", "verify_theory", "analyze_logs"])
def test_script_imports(script):
    """脚本可以作为模块导入且提供main入口"""
    mod = importlib.import_module(script)
    assert callable(mod.main)


def test_config_files_parse():
    """配置文件是合法YAML，且套件文件中的每个用例都能解析为RunConfig"""
    from contact_tlamg.benchmark import BenchmarkRunner, load_config, load_suites, deep_merge

    config = load_config(os.path.join(PROJECT_ROOT, 'configs/benchmark/benchmark_config.yml'))
    config["runtime"]["cache_dir"] = None
    suites = load_suites(os.path.join(PROJECT_ROOT, 'configs/benchmark/suites.yml'))
    assert {"convergence", "drop_study", "comparison", "jacobi_negative", "scaling"} <= set(suites)
    for name, suite in suites.items():
        runner = BenchmarkRunner(deep_merge(config, suite.get("base")))
        for case in suite["cases"]:
            case = dict(case)
            case.pop("name", None)
            runner.run_config(case)
