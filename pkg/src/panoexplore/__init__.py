"""Panoramic world exploration: geometry, oracle renderer, imaginative
exploration, consistency metrics, belief revision, and an EQA harness."""

from .geometry import (CubeMap, RotationSpec, cubemap_to_panorama, panorama_to_cubemap,
                       perspective_view, pixel_to_sphere, rotate_panorama, rotate_sphere,
                       sphere_to_pixel)
from .world import (Pose, Primitive, Scene, SceneParams, Slot, check_collision,
                    generate_dataset, generate_scene, render_depth, render_panorama,
                    sample_straight_path)
from .explore import (ExplorationConfig, ExplorationSession, LoopPath,
                      NoisyOracleGenerator, OracleGenerator, WorldGenerator,
                      execute_loop, run_goal_agnostic, run_goal_driven,
                      sample_loop_path)
from .metrics import (DefaultEmbedding, Embedding, IELCReport, LoopBounds, ielc,
                      latent_mse, mse, psnr, scl_consistency, seam_continuity, ssim)
from .belief import (Belief, HypothesisSpace, Models, ObservationModel,
                     OraclePerception, PixelPerception, YieldPolicy,
                     imaginative_update, infer_other_agent, multi_agent_decide,
                     physical_update)
from .eqa import (AgentClient, BeliefAgent, EvalReport, OmniscientAgent, RandomAgent,
                  RuleAgent, Scenario, StubJudge, decision_accuracy,
                  gold_action_confidence, logic_accuracy, run_scenario, run_suite)
from .suite import builtin_suite
from .reconstruct import backproject, bev, camera_to_world, pointcloud

__version__ = "0.1.0"
