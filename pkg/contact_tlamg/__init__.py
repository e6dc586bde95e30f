"""contact_tlamg - Two-level preconditioned GCR for mortar tied-contact elasticity.

Import submodules directly:
    from contact_tlamg.meshgen import ContactModelSpec, generate_model
    from contact_tlamg.saddle import build_saddle_system
    from contact_tlamg.twolevel import TwoLevelConfig, TwoLevelPreconditioner
    from contact_tlamg.krylov import gcr_solve
"""
