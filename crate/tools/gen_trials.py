"""Writes crates/core/data/trials.ndjson: three curated breast trials plus seeded synthetic ones."""
import json
import random
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "crates/core/data/trials.ndjson"
TOTAL = 215
rng = random.Random(20240612)


def c(kind, field, op, value, text, biomarker=None):
    d = {"kind": kind, "field": field, "op": op, "value": value}
    if biomarker:
        d["biomarker"] = biomarker
    d["text"] = text
    return d


BREAST = c("inclusion", "diagnosis", "equals", "Breast Cancer", "Breast cancer diagnosis.")

curated = [
    {
        "trialId": "TRIAL-0001",
        "title": "Molecular Mechanisms of Clinical Resistance to Targeted Therapy Among Patients With Breast Cancer",
        "conditions": ["Breast Cancer"],
        "recruitment": "recruiting",
        "phase": "na",
        "studyType": "observational",
        "sponsor": "Memorial Sloan Kettering Cancer Center",
        "description": "Tissue and blood collection study of how breast tumors stop responding to "
        "targeted therapy. Participants need a breast cancer diagnosis, must be able to consent to "
        "a biopsy and must be able to undergo a repeat biopsy if one is needed.",
        "cohorts": [
            {
                "name": "Cohort 1",
                "criteria": [
                    BREAST,
                    c("inclusion", "priorTherapy", "has",
                      ["trastuzumab", "pertuzumab", "ado-trastuzumab emtansine", "TDM1", "lapatinib",
                       "neratinib", "trastuzumab deruxtecan"],
                      "Earlier anti-HER2 treatment in the adjuvant or metastatic setting."),
                    c("inclusion", "diseaseStatus", "equals", "Progressing",
                      "Progression or recurrence after earlier therapy."),
                    c("inclusion", "biomarker", "has", "positive",
                      "HER2 positive on a prior biopsy, by FISH amplification or IHC 3+.", biomarker="HER2"),
                ],
            },
            {
                "name": "Cohort 2",
                "criteria": [
                    BREAST,
                    c("inclusion", "priorTherapy", "has",
                      ["letrozole", "anastrozole", "exemestane", "tamoxifen", "fulvestrant"],
                      "Earlier hormonal treatment such as an aromatase inhibitor, SERM or SERD."),
                    c("inclusion", "diseaseStatus", "equals", "Progressing",
                      "Progression after hormonal treatment."),
                ],
            },
        ],
    },
    {
        "trialId": "TRIAL-0002",
        "title": "Cabozantinib +/- Trastuzumab In Breast Cancer Patients w/ Brain Metastases",
        "conditions": ["Breast Cancer", "Brain Tumor - Metastatic"],
        "recruitment": "active_not_recruiting",
        "phase": "phase_2",
        "studyType": "interventional",
        "sponsor": "Dana-Farber Cancer Institute",
        "description": "Cabozantinib alone or with trastuzumab for breast cancer that has spread to the brain.",
        "cohorts": [
            {
                "name": "Brain metastases",
                "criteria": [
                    BREAST,
                    c("inclusion", "metastasisSite", "has", "Brain", "Measurable brain metastases."),
                    c("inclusion", "gender", "equals", "female", "Female participants."),
                    c("inclusion", "age", "ge", 18, "Aged 18 or older."),
                    c("exclusion", "biomarker", "has", "positive", "MET amplification.", biomarker="MET"),
                ],
            }
        ],
    },
    {
        "trialId": "TRIAL-0003",
        "title": "A Phase 1/2 Safety Study of Intratumorally Dosed INT230-6",
        "conditions": ["Breast Cancer", "Head and Neck Cancer"],
        "recruitment": "recruiting",
        "phase": "phase_1_2",
        "studyType": "interventional",
        "sponsor": "Intensity Therapeutics",
        "description": "Dose escalation of an intratumoral injection in solid tumors.",
        "cohorts": [
            {
                "name": "Breast",
                "criteria": [
                    BREAST,
                    c("inclusion", "age", "ge", 18, "Aged 18 or older."),
                    c("inclusion", "biomarker", "in_set", ["positive", "negative"],
                      "PD-L1 status available.", biomarker="PD-L1"),
                ],
            },
            {
                "name": "Head and neck",
                "criteria": [
                    c("inclusion", "diagnosis", "in_set", ["Head and Neck Cancer", "Oropharyngeal Cancer"],
                      "Head and neck cancer diagnosis."),
                ],
            },
        ],
    },
]

# Criteria the breast fixture patient satisfies.
SATISFIED = [
    BREAST,
    c("inclusion", "diagnosis", "in_set", ["Breast Cancer", "Malignant neoplasm of breast"],
      "Breast carcinoma of any histology."),
    c("inclusion", "gender", "equals", "female", "Female participants."),
    c("inclusion", "age", "ge", 18, "Aged 18 or older."),
    c("inclusion", "age", "le", 80, "Aged 80 or younger."),
    c("inclusion", "stage", "at_least_stage", "III", "Stage III or IV disease."),
    c("inclusion", "tnmM", "in_set", ["M1", "M1a", "M1b", "M1c"], "Distant metastases present."),
    c("inclusion", "metastasisSite", "has", ["Bone", "Liver", "Lung"], "Visceral or bone metastases."),
    c("inclusion", "diseaseStatus", "in_set", ["Progressing", "Stable"], "Progressing or stable disease."),
    c("inclusion", "biomarker", "equals", "positive", "HER2 positive disease.", biomarker="HER2"),
    c("inclusion", "laterality", "in_set", ["Unilateral - Left", "Unilateral - Right"], "Unilateral primary."),
    c("exclusion", "priorTherapy", "has", ["capecitabine", "tucatinib"], "Earlier capecitabine or tucatinib."),
    c("exclusion", "metastasisSite", "has", "Skin", "Skin-only metastatic disease."),
    c("exclusion", "biomarker", "has", "positive", "Hormone receptor positive disease.", biomarker="ER"),
    c("exclusion", "histologyGrade", "equals", "G1 (low grade; well differentiated)", "Low grade tumors."),
]

# Biomarkers the fixture leaves undocumented.
UNKNOWN_MARKERS = ["PD-L1", "BRCA1", "BRCA2", "PIK3CA", "ESR1", "MET", "TROP2", "Ki-67", "AKT1", "PTEN"]

DRUGS = ["Cabozantinib", "Tucatinib", "Sacituzumab", "Alpelisib", "Olaparib", "Palbociclib", "Abemaciclib",
         "Pembrolizumab", "Atezolizumab", "Capivasertib", "Elacestrant", "Datopotamab", "Zanidatamab",
         "Ipatasertib", "Talazoparib", "Ribociclib", "Eribulin", "Margetuximab"]
SETTINGS = ["Metastatic Breast Cancer", "HER2-Positive Breast Cancer", "Advanced Breast Cancer",
            "Breast Cancer With Brain Metastases", "Previously Treated Breast Cancer",
            "Hormone Receptor-Positive Breast Cancer", "Triple-Negative Breast Cancer"]
DESIGNS = ["Combined With Trastuzumab", "Versus Physician's Choice", "As Maintenance Therapy",
           "With Endocrine Therapy", "After Progression on Anti-HER2 Therapy", "in Older Adults"]
EXTRA_CONDITIONS = ["Metastatic Breast Cancer", "Solid Tumor", "Brain Tumor - Metastatic", "HER2-positive Breast Cancer",
                    "Ovarian Cancer", "Lung Cancer"]
SPONSORS = ["National Cancer Institute", "Alliance for Clinical Trials in Oncology", "NRG Oncology",
            "SWOG Cancer Research Network", "ECOG-ACRIN Cancer Research Group", "University Cancer Center",
            "Regional Oncology Consortium"]
RECRUITMENT = ["recruiting"] * 5 + ["active_not_recruiting"] * 2 + ["completed", "suspended"]
PHASES = ["early_phase_1", "phase_1", "phase_1_2", "phase_1_2", "phase_2", "phase_2", "phase_2", "phase_2_3",
          "phase_3", "phase_3", "phase_4", "na"]


def unknown_criterion():
    m = rng.choice(UNKNOWN_MARKERS)
    status = rng.choice(["positive", "negative"])
    if rng.random() < 0.7:
        return c("inclusion", "biomarker", "has", status, f"{m} {status}.", biomarker=m)
    return c("exclusion", "biomarker", "has", status, f"{m} {status} tumors are excluded.", biomarker=m)


def synthetic(n):
    # Unknowns make up at least a third of the criteria, which keeps scores at or below 5/6.
    size = rng.randint(3, 6)
    unknowns = max(1, -(-size // 3))
    crit = [BREAST] + rng.sample(SATISFIED[1:], size - unknowns - 1) + [unknown_criterion() for _ in range(unknowns)]
    rng.shuffle(crit[1:])
    cohorts = [{"name": "Main", "criteria": crit}]
    if rng.random() < 0.2:
        cohorts.append({"name": "Expansion", "criteria": [BREAST, unknown_criterion(), unknown_criterion()]})
    drug = rng.choice(DRUGS)
    setting = rng.choice(SETTINGS)
    phase = rng.choice(PHASES)
    study_type = "observational" if phase == "na" and rng.random() < 0.6 else "interventional"
    conditions = ["Breast Cancer"]
    if rng.random() < 0.4:
        conditions.append(rng.choice(EXTRA_CONDITIONS))
    return {
        "trialId": f"TRIAL-{n:04d}",
        "title": f"{drug} {rng.choice(DESIGNS)} for {setting}",
        "conditions": conditions,
        "recruitment": rng.choice(RECRUITMENT),
        "phase": phase,
        "studyType": study_type,
        "sponsor": rng.choice(SPONSORS),
        "description": f"Study of {drug.lower()} in {setting.lower()}.",
        "cohorts": cohorts,
    }


trials = curated + [synthetic(n) for n in range(len(curated) + 1, TOTAL + 1)]
OUT.write_text("".join(json.dumps(t, separators=(",", ":"), ensure_ascii=False) + "\n" for t in trials))
print(f"wrote {len(trials)} trials to {OUT}")
