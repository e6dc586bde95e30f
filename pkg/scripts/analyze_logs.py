#!/usr/bin/env python3
"""
日志分析脚本 - 汇总run_benchmark.py / run_suite.py写出的[Result]行
用法: python scripts/analyze_logs.py [log_file]
"""

import re
import sys
from collections import Counter
from datetime import datetime
from pathlib import Path
from typing import Optional

import pandas as pd

RESULT_RE = re.compile(
    r"\[Result\] model=(?P<model>\S+) method=(?P<method>\S+) NIT=(?P<nit>\d+) "
    r"r_rel=(?P<rrel>\S+) converged=(?P<conv>True|False) setup=(?P<setup>[\d.]+)s solve=(?P<solve>[\d.]+)s"
)
STAMP_RE = re.compile(r"^(\d{4}-\d{2}-\d{2} \d{2}:\d{2}:\d{2})")

# 警告归类: (子串, 类别)，按顺序匹配
WARNING_KINDS = (
    ("not converged", "GCR未收敛"),
    ("pseudo-inverse", "最粗层奇异"),
    ("singular", "最粗层奇异"),
    ("no Dirichlet edge", "物体未约束"),
    ("failed", "求解失败"),
)


def _result_record(match: re.Match) -> dict:
    return {
        'model': match.group('model'),
        'method': match.group('method'),
        'NIT': int(match.group('nit')),
        'r_rel': float(match.group('rrel')),
        'converged': match.group('conv') == 'True',
        'setup': float(match.group('setup')),
        'solve': float(match.group('solve')),
    }


def parse_log_file(log_file: str) -> dict:
    """解析日志文件，提取结果行、AMG构建次数、breakdown与警告/错误"""
    path = Path(log_file)
    stats = {
        'file': log_file,
        'start_time': None,
        'end_time': None,
        'duration': None,
        'results': [],
        'amg_setups': 0,
        'breakdowns': 0,
        'warnings': [],
        'errors': [],
    }
    if not path.is_file():
        stats['errors'].append(f"Log file not found: {log_file}")
        return stats

    stamps = []
    for line in path.read_text(encoding='utf-8').splitlines():
        stamp = STAMP_RE.match(line)
        if stamp:
            stamps.append(datetime.strptime(stamp.group(1), '%Y-%m-%d %H:%M:%S'))

        result = RESULT_RE.search(line)
        if result:
            stats['results'].append(_result_record(result))
        elif '[AMG]' in line and 'levels' in line:
            stats['amg_setups'] += 1

        if 'breakdown' in line.lower():
            stats['breakdowns'] += 1
        if '[WARNING]' in line:
            stats['warnings'].append(line.strip())
        elif '[ERROR]' in line:
            stats['errors'].append(line.strip())

    if stamps:
        stats['start_time'], stats['end_time'] = stamps[0], stamps[-1]
        stats['duration'] = str(stamps[-1] - stamps[0])
    return stats


def summarize_results(results: list) -> pd.DataFrame:
    """按 (model, method) 汇总迭代数与耗时"""
    if not results:
        return pd.DataFrame(columns=['model', 'method', 'runs', 'converged', 'NIT_min', 'NIT_max',
                                     'r_rel_max', 'setup_mean', 'solve_mean'])
    df = pd.DataFrame(results)
    return (df.groupby(['model', 'method'], sort=False)
              .agg(runs=('NIT', 'size'), converged=('converged', 'sum'),
                   NIT_min=('NIT', 'min'), NIT_max=('NIT', 'max'),
                   r_rel_max=('r_rel', 'max'), setup_mean=('setup', 'mean'),
                   solve_mean=('solve', 'mean'))
              .reset_index())


def classify_warnings(warnings: list) -> Counter:
    kinds = Counter()
    for w in warnings:
        kinds[next((kind for key, kind in WARNING_KINDS if key in w), "其他")] += 1
    return kinds


def print_stats(stats: dict):
    """打印统计信息"""
    bar = "=" * 70
    print(f"\n{bar}\n基准日志汇总\n{bar}")
    print(f"\n日志文件: {stats['file']}")
    if stats['start_time']:
        print(f"时间范围: {stats['start_time']:%Y-%m-%d %H:%M:%S} -> {stats['end_time']:%H:%M:%S}"
              f" (共 {stats['duration']})")

    summary = summarize_results(stats['results'])
    print(f"\n【求解统计】 运行 {len(stats['results'])} 次, AMG层次构建 {stats['amg_setups']} 次")
    if not summary.empty:
        with pd.option_context('display.width', 120, 'display.float_format', '{:.3g}'.format):
            print(summary.to_string(index=False))

    print(f"\n【问题统计】 警告 {len(stats['warnings'])}, 错误 {len(stats['errors'])}, "
          f"GCR breakdown {stats['breakdowns']}")
    for kind, count in classify_warnings(stats['warnings']).most_common(5):
        print(f"  {kind}: {count}")
    for error in stats['errors'][:5]:
        print(f"  {error[:100]}")
    print(bar)


def find_latest_log(log_dir: str = 'logs') -> Optional[str]:
    """查找最新的benchmark/suite日志文件"""
    root = Path(log_dir)
    if not root.is_dir():
        return None
    candidates = [p for p in root.glob('*.log') if p.name.startswith(('benchmark_', 'suite_'))]
    if not candidates:
        return None
    # 文件名后缀是时间戳，按其排序
    latest = max(candidates, key=lambda p: p.name.split('_', 1)[1])
    return str(latest)


def main():
    log_file = sys.argv[1] if len(sys.argv) > 1 else find_latest_log()
    if not log_file:
        print("错误: logs/ 下没有benchmark或suite日志")
        print("用法: python scripts/analyze_logs.py [log_file]")
        sys.exit(1)
    print_stats(parse_log_file(log_file))


if __name__ == "__main__":
    main()
