from dotenv import load_dotenv
import os

# Cargar variables del archivo .env
load_dotenv()

class Config:
    # 🔊 Única variable de entorno soportada: verbosidad del log
    LOG_LEVEL = os.getenv("WONG_REDUCE_LOG_LEVEL", "INFO").upper()

    TOOL_NAME = "wong-reduce"
    VERSION = "1.0.0"

    # 📐 Tolerancias geométricas
    TOL_SIGMA = 1e-10          # |χ| sobre Σ
    TOL_KILLING = 1e-7         # limitada por diferencias finitas
    TOL_HORIZ = 1e-9           # |𝒜·q̇| de la velocidad reducida
    TOL_IDENTITY = 1e-9        # identidades de proyectores
    TOL_ALGEBRA = 1e-12        # identidades del álgebra de Lie

    # 🧮 Derivadas y álgebra lineal
    FD_STEP = 1e-5             # diferencias centradas de 4º orden
    FP_CONDITION_MAX = 1e12    # por encima: punto no libre / mal condicionado
    PINV_CUTOFF = 1e-10        # truncado relativo para Gᴴ
    DEFLATION_CUTOFF = 1e-10   # modos cero del operador de Faddeev-Popov
    GRIBOV_TOL = 1e-10

    # 🔁 Integración y solvers
    BLOWUP_NORM = 1e12
    NEWTON_MAX_ITER = 50
    SOLVER_MAX_ITER = 200
    SOLVER_TOL = 1e-8
    EIGEN_OVERLAP_MIN = 0.5

    # 📊 Umbrales de los chequeos de las ejecuciones
    TOL_ENERGY_DRIFT = 1e-7    # relativa, RK4
    TOL_SIGMA_DRIFT = 1e-9     # |χ| a lo largo de la trayectoria
    TOL_ORACLE_Q = 1e-5
    TOL_ORACLE_P = 1e-6
    CONVERGENCE_RATIO = (12.0, 20.0)
    TOL_EQUILIBRIUM_Q_DOT = 1e-6
    TOL_EQUILIBRIUM_P_DRIFT = 1e-8
    TOL_CROSS_CHECK = 1e-8     # red frente al camino genérico, limitada por diferencias finitas
    TOL_POTENTIAL_GRADIENT = 1e-6

    # Normalización k̂ = -k / KK_SCALE (k̂ = I para so(3))
    KK_SCALE = 2.0

# Tolerancias por defecto que un RunConfig puede sobrescribir
DEFAULT_TOLERANCES = {
    'sigma': Config.TOL_SIGMA,
    'killing': Config.TOL_KILLING,
    'horizontal': Config.TOL_HORIZ,
    'identity': Config.TOL_IDENTITY,
    'fd_step': Config.FD_STEP,
    'fp_condition': Config.FP_CONDITION_MAX,
    'pinv_cutoff': Config.PINV_CUTOFF,
    'deflation': Config.DEFLATION_CUTOFF,
    'solver': Config.SOLVER_TOL,
}
