import yaml
from rgmjmcmc.bitmask import BitMask

_bitdefs = yaml.safe_load("""
#- outcome of one chain step
stepmask:
    - [ACCEPTED,            0, "Proposal accepted"]
    - [MH_REJECTED,         1, "Proposal rejected by the Metropolis-Hastings test"]
    - [STAGE1_REJECTED,     2, "Delayed acceptance: rejected on the target ratio, no backward search"]
    - [STAGE2_REJECTED,     3, "Delayed acceptance: rejected on the randomization ratio"]
    - [INFEASIBLE_REVERSE,  4, "Backward population misses a feature of the current model"]
    - [POPULATION_FAILURE,  5, "Population proposal could not be filled"]
    - [PROPOSAL_FAILURE,    6, "Randomization could not satisfy the model size cap"]
    - [EVIDENCE_FAILURE,    7, "Proposed model has no finite evidence"]
    - [POPULATION_EVOLVED,  8, "Population evolved after this step"]
""")

stepmask = BitMask('stepmask', _bitdefs)

#- rejection reason written in the step logs for each failure bit
reasons = {
    'ACCEPTED': 'accepted',
    'MH_REJECTED': 'rejected',
    'STAGE1_REJECTED': 'stage1-rejected',
    'STAGE2_REJECTED': 'stage2-rejected',
    'INFEASIBLE_REVERSE': 'infeasible-reverse',
    'POPULATION_FAILURE': 'population-failure',
    'PROPOSAL_FAILURE': 'proposal-failure',
    'EVIDENCE_FAILURE': 'evidence-failure',
}
