#!/usr/bin/env python3
"""The core system trade: stream every raw sample over the radio, or run the
spectral analysis on the device and send only results.

Run:  python demos/03_streaming_vs_edge.py
"""

from wearsim import link
from wearsim.device import ClusterCostModel, task_efficiency_mflops_per_mw
from wearsim.energy import PowerCalibration, battery_lifetime_h
from wearsim.host import compare_modes, mode_table_text

stream = link.required_throughput(8, 1000)
edge = link.required_throughput(8, 1000, edge=True, hop_ms=50)
print(f"raw streaming, 8 ch at 1 kSPS: {stream} bps offered")
print(f"on-device results, 1 value/channel every 50 ms: {edge:.0f} bps")
print(f"bandwidth reduction: {link.reduction_ratio(stream, edge):.2%}\n")

cost = ClusterCostModel()
cal = PowerCalibration()
batch_ms = cost.batch_time_s(1024, 8) * 1e3
print(f"compute cluster: 8 transforms of 1024 points = "
      f"{cost.batch_cycles(1024, 8):.0f} cycles = {batch_ms:.3f} ms at "
      f"{cost.clock_hz / 1e6:.0f} MHz")
print(f"single-core vs 8-core cycle ratio: "
      f"{cost.cycles_per_fft(1024, 1) / cost.cycles_per_fft(1024, 8):.1f}x")
print(f"task efficiency: "
      f"{task_efficiency_mflops_per_mw(cost, cal.cluster_active_mw):.1f} Mflops/s/mW")
print(f"hop utilization: {batch_ms / 50:.2%} of the 50 ms cadence\n")

print(mode_table_text(compare_modes()))
print(f"\nbattery life at the edge-mode budget "
      f"({cal.edge_system_mw} mW): {battery_lifetime_h(cal.edge_system_mw):.1f} h")
sleep_mw = cal.imu_mw
print(f"battery life asleep ({sleep_mw} mW): "
      f"{battery_lifetime_h(sleep_mw) / 24:.0f} days")
