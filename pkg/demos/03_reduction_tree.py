"""
Folding the reduction tree onto a short pipeline
================================================

A 16-lane unit reduces its lanes with a 4-level adder tree plus one
accumulate level.  Those five levels need 8 + 4 + 2 + 1 + 1 = 16 adders, which
fits in a single pipeline stage of 16 lanes, so one vector can enter every
cycle without two levels ever claiming the same adder.
"""

from rnnspatial.arch import (
    compute_memory_ratio, default_config, folded_tree_schedule, original_plasticine,
    pcu_mac_throughput, reduction_latency, replay_schedule,
)

sched = folded_tree_schedule(lanes=16, stages=4)
for level in sched.levels:
    print(f"level {level.level}: stage {level.stage}, lanes {level.lanes[0]}..{level.lanes[-1]}")
print("tree latency:", sched.latency, "cycles; with multiply and pack stages:", reduction_latency(16))
print("double-booked slots over 100 back-to-back vectors:", replay_schedule(sched, 100))

cfg = default_config()
print("8-bit MACs per unit per cycle:", pcu_mac_throughput(cfg.lanes, "f8"))
print("derived peak:", cfg.peak_flops() / 1e12, "TFLOPS")
print("compute:memory ratio, original array:", compute_memory_ratio(original_plasticine()))
print("compute:memory ratio, tuned array:   ", compute_memory_ratio(cfg))
