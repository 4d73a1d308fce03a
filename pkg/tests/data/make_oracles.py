"""Build tests/data/oracles.json: frozen seeded outputs of the public samplers and solvers."""
import json, numpy as np
from interlace_lab import links, rmt, sde, multilevel, pde, matrix, verify
from interlace_lab.core import HPParams

def build():
    out = {}
    r = verify.seed_split(2024, 0)
    out["hp_cue_cayley"] = links.hp_sample(HPParams(0, 0, 3), "cue-cayley", r, 4).tolist()
    r = verify.seed_split(2024, 1)
    out["link_sample"] = links.link_sample([-1.0, 0.5, 2.0], r, 4).tolist()
    r = verify.seed_split(2024, 2)
    out["gue_eigs"] = rmt.eval_(rmt.gue_sample(3, 1.0, r, 2)).tolist()
    r = verify.seed_split(2024, 3)
    out["hp_path"] = sde.simulate(sde.SDESystemSpec("hp", HPParams(0.3, 0.1, 3)), [-1.0, 0.5, 2.0], 0.05, r).final.tolist()
    r = verify.seed_split(2024, 4)
    lv = multilevel.gibbs_sample(multilevel.hp_bottom_sampler(HPParams(0, 0, 2)), r, 3)
    out["reflected"] = multilevel.flatten_levels(
        multilevel.reflected_simulate(multilevel.ReflectedSpec(HPParams(0, 0, 2)), lv, 0.02, r).final()).tolist()
    r = verify.seed_split(2024, 5)
    p = multilevel.PushBlockParams(0.5, 0.5, 0.5, 0.5, N=2, window=(0, 1000))
    out["pushblock"] = multilevel.pushblock_simulate(p, [[20], [19, 21]], 0.002, r).states[-1].tolist()
    r = verify.seed_split(2024, 6)
    X = matrix.matrix_simulate(matrix.MatrixSDESpec(2, HPParams(0, 0, 2)), np.diag([-1.0, 1.0]), 0.01, r).final
    out["matrix_eigs"] = rmt.eval_(X).tolist()
    g = pde.solve_density(2, HPParams(0.3, 0.2), False, 0.2, pde.GridConfig(h=0.04))
    out["pde_density"] = [float(g.density(a, b)) for a, b in ((-1, 0), (0, 0.5), (1, 2))]
    return out

if __name__ == "__main__":
    json.dump(build(), open(__import__("pathlib").Path(__file__).with_name("oracles.json"), "w"), indent=1)
