"""
Default settings for the underwater emergency response simulator
"""
import math

# Scenario area
AREA_WIDTH = 500.0  # meters (x)
AREA_LENGTH = 500.0  # meters (y)
AREA_DEPTH = 200.0  # meters below the surface
NUM_USNS = 100
PACKET_SIZE_BITS = 1.0e6  # 1 Mb per USN
DEFAULT_SEED = 7

# Optical link (UL)
ETA_T = 0.9  # transmitter optical efficiency
ETA_R = 0.9  # receiver optical efficiency
C_LAMBDA = 0.1514  # 1/m extinction coefficient c = a + b
A_REC = 0.01  # m^2 receiver aperture
THETA0_DEG = 68.0  # divergence half-angle
UL_FREQUENCY_HZ = 1.0e13
UL_MAX_POWER_W = 0.01  # 10 mW
UL_SPEED_MPS = 2.25e8
UL_BANDWIDTH_HZ = 10.0e6

# Acoustic link (UA)
KAPPA = 1.5  # spreading coefficient
SHIPPING = 0.5
WIND_SPEED = 0.5  # m/s
UA_FREQUENCY_HZ = 20.0e3
UA_MAX_POWER_W = 5.0
UA_SPEED_MPS = 1500.0
UA_BANDWIDTH_HZ = 5.0e3
UA_AMBIENT_NOISE = False  # use Thorp-style ambient noise instead of N0 for UA

# Radio link (RF)
MU = 1.256e-6  # H/m
IOTA = 0.01  # S/m
RF_FREQUENCY_HZ = 5.0e6
RF_MAX_POWER_W = 5.0
RF_SPEED_MPS = 2.25e8
RF_BANDWIDTH_HZ = 1.0e6

# Thresholds
N0_DBM = -130.0
P_MIN_DBM = N0_DBM + 5.0  # 5 dB above the noise floor
SIGMA_DB = 4.0  # shadowing std
FADE_MARGIN_DB = 10.0
EPSILON = 0.01  # outage threshold
GAMMA = 0.1  # SINR threshold
INTERFERENCE_SWEEPS = 1

# Seawater and buoyancy
RHO = 1027.0  # kg/m^3
ETA_B = 0.7
M_B = 0.494  # kg
GRAVITY = 9.8
D_MAX = 200.0  # meters
P0 = 101325.0  # Pa

# Linear, rotation and electronic systems
ETA_L = 0.85
M_L = 11.0  # kg
A_L = 0.1
ETA_S = 0.85
A_S = 1.0
A_E = 1.5
PSI0 = 0.0
PSI1 = 0.0
E_RX_PER_BIT = 1.0e-7  # J/bit

# AUV settings
V_MAX = 1.0  # m/s
E_MAX = 2.5e9  # J
N_MAX = 25  # IUSNs per AUV
VELOCITY_MODE = "budget"  # "budget" (energy-budget min form) or "corrected" (always v_max)
REFINE_POSITIONS = True
LLOYD_MAX_ITER = 100
WEISZFELD_MAX_ITER = 50
WEISZFELD_TOL = 1e-6

# RL-specific settings
RL_ALPHA = 0.1
RL_BETA = 0.9
RL_ELL = 0.1
RL_EPISODES = 500
RL_EPOCHS = 50
OUTAGE_BINS = 2
CAPACITY_BINS = 8
CAPACITY_BIN_RANGE = (1.0, 1.0e9)  # bits/s, log-spaced

# DQN settings
DQN_EPISODES = 50
DQN_WINDOW = 1
DQN_HIDDEN = (32, 32)
DQN_LEARNING_RATE = 0.01
REPLAY_CAPACITY = 1000
MINIBATCH_SIZE = 32

# MOEA/D settings
MOEA_SUBPROBLEMS = 50
MOEA_NEIGHBORS = 10
MOEA_GENERATIONS = 100
MOEA_BLEND_ALPHA = 0.5
MOEA_MUTATION_RATE = 0.2
MOEA_MUTATION_SCALE = 0.1  # fraction of the x2 range
MOEA_NORMALIZE = True
MOEA_X2_LEVELS = 16  # log-spaced IUSN power levels; None = continuous
MOEA_X2_MIN_FRACTION = 1e-6  # lowest level as a fraction of the largest link power

# Run settings
FORMAT_VERSION = 1
OUTPUT_DIR = "runs/default"
METHODS = ("qlearning", "sarsa", "dqn")
SELECTION = "knee"  # or "ratio"
STAGES = ("generate", "erm", "rl", "deploy", "mop", "plots")
DEFAULT_SCENARIO_PATH = "data/example_scenario.json"

THETA0 = math.radians(THETA0_DEG)
