"""Desk-scale autonomous tube-insertion sandbox.

Subpackages:
    numkit   -- numpy-backed reverse-mode autodiff, Adam, checkpoint container
    simcore  -- 2-D quasi-static tube insertion simulator with force sensing
    vision   -- tube tracking: mask -> components -> skeleton -> curvature
    datakit  -- episode recording, safety metrics, filtering, dataset assembly
    policy   -- action-confidence chunking transformer family
    evalkit  -- scripted expert, rollouts, ablation driver, reporting
    teleop   -- websocket bridge exposing the simulator to a human console
"""

__version__ = "0.1.0"
