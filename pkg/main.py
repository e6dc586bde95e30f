#!/usr/bin/env python3
"""
main.py - 接触问题两层预条件GCR求解器主入口

提供交互式工作流程，支持：
1. 单次基准测试（模型 x 预条件子）
2. 实验套件（收敛性、丢弃阈值、对比、规模）
3. 理论验证（稠密oracle检查）
4. 运行日志分析
"""

import os
import sys
import logging
from datetime import datetime
from pathlib import Path

# 添加scripts目录和项目根目录到Python路径
sys.path.insert(0, os.path.join(os.path.dirname(__file__), 'scripts'))
sys.path.insert(0, os.path.dirname(__file__))

from logging_config import default_log_file, setup_logging  # noqa: E402

log_file = default_log_file("main", os.path.join(os.path.dirname(__file__), "logs"))
setup_logging(level=logging.INFO, log_file=log_file)
logger = logging.getLogger(__name__)
logger.info("=" * 60)
logger.info("接触求解器启动")
logger.info("日志文件: %s", log_file)
logger.info("=" * 60)

SUITES_PATH = "configs/benchmark/suites.yml"
CONFIG_PATH = "configs/benchmark/benchmark_config.yml"


def print_banner():
    """打印程序横幅"""
    print("\n" + "=" * 60)
    print("   Mortar绑定接触 两层AMG预条件GCR求解器")
    print("   Two-level Preconditioned GCR for Tied Contact")
    print("=" * 60)
    print()


def print_menu():
    """打印主菜单"""
    print("\n请选择要执行的操作：")
    print("-" * 40)
    print("  [1] 单次基准测试")
    print("  [2] 运行实验套件")
    print("  [3] 理论验证（小规模稠密检查）")
    print("  [4] 分析运行日志")
    print("  [0] 退出程序")
    print("-" * 40)


def _ask(prompt: str, default: str) -> str:
    value = input(f"{prompt} [{default}]: ").strip()
    return value or default


def run_single_benchmark():
    """交互式单次基准测试"""
    print("\n" + "=" * 50)
    print("  单次基准测试")
    print("=" * 50)

    model = _ask("模型 (1/2/3)", "3")
    resolution = _ask("网格分辨率", "16")
    precond = _ask("预条件子 (two_level/simple/plain_amg/none)", "two_level")
    argv = ["--model", model, "--resolution", resolution, "--precond", precond]
    if precond == "two_level":
        argv += ["--interp", _ask("插值 (ideal/simplified)", "simplified"),
                 "--smoother", _ask("光滑子 (exactf/ssimple/jac/none)", "exactf")]
    if os.path.exists(CONFIG_PATH):
        argv += ["--config", CONFIG_PATH]

    try:
        from run_benchmark import main as benchmark_main
        status = benchmark_main(argv)
    except Exception as e:
        logger.error(f"基准测试失败: {e}")
        print(f"\n错误: {e}")
        return

    if status == 0:
        print("\n基准测试完成！")
        print("报告保存在: outputs/benchmark/")


def run_suite():
    """运行实验套件"""
    print("\n" + "=" * 50)
    print("  实验套件")
    print("=" * 50)

    if not os.path.exists(SUITES_PATH):
        print(f"\n错误：套件文件不存在: {SUITES_PATH}")
        return

    from run_suite import main as suite_main

    suite_main(["--list", "--suites", SUITES_PATH])
    name = input("\n请输入套件名称 (回车返回): ").strip()
    if not name:
        return

    print("\n开始运行套件...")
    print("提示：大规模套件可能需要较长时间，请耐心等待。")
    print("      日志将自动保存到 logs/ 目录。")
    try:
        suite_main([name, "--suites", SUITES_PATH, "--config", CONFIG_PATH])
    except Exception as e:
        logger.error(f"套件运行失败: {e}")
        print(f"\n错误: {e}")


def run_verification():
    """理论验证"""
    print("\n" + "=" * 50)
    print("  理论验证")
    print("=" * 50)

    resolution = _ask("网格分辨率 (稠密检查，建议2-3)", "2")
    try:
        from verify_theory import main as verify_main
        status = verify_main(["--resolution", resolution])
    except Exception as e:
        logger.error(f"理论验证失败: {e}")
        print(f"\n错误: {e}")
        return

    print("\n全部检查通过！" if status == 0 else "\n存在未通过的检查，详见日志。")


def analyze_logs():
    """分析运行日志"""
    print("\n" + "=" * 50)
    print("  日志分析")
    print("=" * 50)

    logs_dir = "logs"
    if not os.path.exists(logs_dir):
        print("\n日志目录不存在。")
        return

    log_files = sorted(Path(logs_dir).glob("*.log"), reverse=True)
    if not log_files:
        print("\n没有找到日志文件。")
        return

    # 列出日志文件
    print("\n可用的日志文件：")
    for i, log_file in enumerate(log_files, 1):
        mtime = datetime.fromtimestamp(log_file.stat().st_mtime)
        print(f"  [{i}] {log_file.name} ({mtime.strftime('%Y-%m-%d %H:%M')})")

    print(f"  [0] 返回主菜单")

    choice = input("\n请选择要分析的日志 (序号): ").strip()

    if choice == '0':
        return

    try:
        idx = int(choice) - 1
        if 0 <= idx < len(log_files):
            from analyze_logs import parse_log_file, print_stats

            print_stats(parse_log_file(str(log_files[idx])))
        else:
            print("无效选择")
    except ValueError:
        print("请输入有效的数字")


def main():
    """主函数"""
    print_banner()

    while True:
        print_menu()
        choice = input("请输入选择 (0-4): ").strip()

        if choice == '1':
            run_single_benchmark()
        elif choice == '2':
            run_suite()
        elif choice == '3':
            run_verification()
        elif choice == '4':
            analyze_logs()
        elif choice == '0':
            print("\n感谢使用，再见！")
            break
        else:
            print("\n无效选择，请重新输入。")

        input("\n按回车键继续...")


if __name__ == "__main__":
    main()
