use std::time::Duration;

use caselab_core::registry::{personalized_predict, ModelArtifact, PredictionOutput, Registry};
use caselab_core::synth::{default_cohort_spec, generate, GeneratorConfig};
use caselab_core::tabular::{write_csv, Record, Value as Cell};
use caselab_service::{serve_on, AppState};
use serde_json::{json, Value};

struct Server {
    base: String,
    client: reqwest::Client,
    dir: tempfile::TempDir,
    _stop: tokio::sync::oneshot::Sender<()>,
}

async fn start() -> Server {
    let dir = tempfile::tempdir().unwrap();
    let registry = Registry::open(dir.path()).unwrap();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    tokio::spawn(serve_on(listener, AppState::new(registry, 2), async {
        let _ = rx.await;
    }));
    Server {
        base: format!("http://{addr}"),
        client: reqwest::Client::new(),
        dir,
        _stop: tx,
    }
}

impl Server {
    async fn post(&self, path: &str, body: &Value) -> (u16, Value) {
        let r = self
            .client
            .post(format!("{}{path}", self.base))
            .json(body)
            .send()
            .await
            .unwrap();
        (r.status().as_u16(), r.json().await.unwrap_or(Value::Null))
    }

    async fn get(&self, path: &str) -> (u16, Value) {
        let r = self.client.get(format!("{}{path}", self.base)).send().await.unwrap();
        (r.status().as_u16(), r.json().await.unwrap_or(Value::Null))
    }

    async fn wait_job(&self, id: &str) -> Value {
        for _ in 0..600 {
            let (code, job) = self.get(&format!("/jobs/{id}")).await;
            assert_eq!(code, 200);
            if job["status"] == "done" || job["status"] == "failed" {
                return job;
            }
            tokio::time::sleep(Duration::from_millis(50)).await;
        }
        panic!("job {id} did not finish");
    }

    fn load_model(&self, id: &str) -> ModelArtifact {
        ModelArtifact::load(&self.dir.path().join(format!("{id}.json"))).unwrap()
    }
}

fn small_cohort_config() -> GeneratorConfig {
    GeneratorConfig {
        n_total: 700,
        n_incomplete: 50,
        n_excluded: 70,
        seed: 3,
        ..GeneratorConfig::default()
    }
}

async fn upload_synthetic(server: &Server) -> (String, String) {
    let cfg = small_cohort_config();
    let ds = generate(&cfg).unwrap();
    let mut csv = Vec::new();
    write_csv(&ds, &mut csv).unwrap();
    let (code, created) = server
        .post(
            "/datasets",
            &json!({ "csv": String::from_utf8(csv).unwrap(), "schema": ds.schema() }),
        )
        .await;
    assert_eq!(code, 201, "{created}");
    assert_eq!(created["n_rows"], 700);
    let ds_id = created["id"].as_str().unwrap().to_string();

    let spec = default_cohort_spec(&cfg);
    let (code, cohort) = server
        .post(
            "/cohorts",
            &json!({ "dataset_id": ds_id, "criteria": spec.criteria, "analysis_vars": spec.analysis_vars }),
        )
        .await;
    assert_eq!(code, 201, "{cohort}");
    assert_eq!(cohort["n_rows"], 580);
    assert_eq!(cohort["missingness"]["incomplete_n"], 50);
    (ds_id, cohort["id"].as_str().unwrap().to_string())
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn datasets_and_cohorts() {
    let server = start().await;
    let (ds_id, cohort_id) = upload_synthetic(&server).await;

    let (code, summary) = server.get(&format!("/datasets/{ds_id}/summary")).await;
    assert_eq!(code, 200);
    let vars = summary["variables"].as_array().unwrap();
    assert!(vars
        .iter()
        .any(|v| v["name"] == "gender" && v["summary"]["kind"] == "categorical"));

    let (code, flow) = server.get(&format!("/cohorts/{cohort_id}/flowchart")).await;
    assert_eq!(code, 200);
    let steps = flow["flowchart"]["steps"].as_array().unwrap();
    assert_eq!(steps.last().unwrap()["n_excluded"], 50);
    assert_eq!(flow["flowchart"]["final_n"], 580);
    assert!(flow["text"].as_str().unwrap().contains("incomplete data"));

    assert_eq!(server.get("/datasets/ds-999/summary").await.0, 404);
    assert_eq!(server.get("/cohorts/co-999/flowchart").await.0, 404);
    let (code, err) = server
        .post("/cohorts", &json!({ "dataset_id": ds_id, "analysis_vars": ["nope"] }))
        .await;
    assert_eq!(code, 422);
    assert!(err["error"].as_str().unwrap().contains("nope"));
    let (code, _) = server.post("/datasets", &json!({ "csv": "a\n1\n" })).await;
    assert_eq!(code, 422);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn bayesnet_job_and_prediction() {
    let server = start().await;
    let (_, cohort_id) = upload_synthetic(&server).await;
    let (code, started) = server
        .post(
            "/analyses/bayesnet",
            &json!({
                "cohort_id": cohort_id,
                "variables": ["victimCategory", "timeToEval", "gender"],
                "target": "TIW",
                "hill_climb": { "restarts": 2, "seed": 4 },
            }),
        )
        .await;
    assert_eq!(code, 202);
    let job_id = started["job_id"].as_str().unwrap().to_string();
    let job = server.wait_job(&job_id).await;
    assert_eq!(job["status"], "done", "{job}");
    let again = server.get(&format!("/jobs/{job_id}")).await.1;
    assert_eq!(again, job);
    let model_id = job["result"]["model_id"].as_str().unwrap().to_string();

    let (_, models) = server.get("/models").await;
    assert_eq!(models["models"][0]["id"], model_id.as_str());
    let (code, meta) = server.get(&format!("/models/{model_id}")).await;
    assert_eq!(code, 200);
    assert_eq!(meta["kind"], "bayes_net");
    assert_eq!(meta["output"]["name"], "TIW");
    assert!(meta["input_schema"]
        .as_array()
        .unwrap()
        .iter()
        .all(|c| c["kind"] == "categorical"));

    let artifact = server.load_model(&model_id);
    let mut record = Record::new();
    for v in &artifact.required_variables {
        let spec = artifact.input_schema.iter().find(|s| &s.name == v).unwrap();
        record.insert(v.clone(), Cell::Label(spec.category_labels()[0].clone()));
    }
    let (code, api) = server
        .post(
            &format!("/models/{model_id}/predict"),
            &serde_json::to_value(&record).unwrap(),
        )
        .await;
    assert_eq!(code, 200, "{api}");
    let lib = serde_json::to_value(personalized_predict(&artifact, &record).unwrap()).unwrap();
    assert_eq!(api, lib);

    let (code, err) = server
        .post(&format!("/models/{model_id}/predict"), &json!({ "gender": "Robot" }))
        .await;
    assert_eq!(code, 422);
    assert_eq!(err["field"], "gender");
    assert_eq!(server.post("/models/bn-missing/predict", &json!({})).await.0, 404);
    assert_eq!(server.get("/jobs/job-999").await.0, 404);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn svm_job_and_concurrent_predictions() {
    let server = start().await;
    let (_, cohort_id) = upload_synthetic(&server).await;
    let (code, started) = server
        .post(
            "/analyses/svm-grid",
            &json!({
                "cohort_id": cohort_id,
                "features": ["timeToEval", "victimCategory", "ageYears"],
                "target": "TIW",
                "positive": "≥9",
                "grid": { "gammas": [0.1, 1.0], "costs": [1.0, 10.0] },
                "folds": 3,
                "seed": 9,
                "smo": { "class_weights": { "mode": "inverse_prevalence" } },
            }),
        )
        .await;
    assert_eq!(code, 202, "{started}");
    let job = server.wait_job(started["job_id"].as_str().unwrap()).await;
    assert_eq!(job["status"], "done", "{job}");
    assert_eq!(job["result"]["grid"]["cells"].as_array().unwrap().len(), 4);
    let model_id = job["result"]["model_id"].as_str().unwrap().to_string();
    let artifact = server.load_model(&model_id);

    let mut record = Record::new();
    record.insert("timeToEval".into(), Cell::Label("≥72".into()));
    record.insert("victimCategory".into(), Cell::Label("Other".into()));
    record.insert("ageYears".into(), Cell::Number(33.0));
    let body = serde_json::to_value(&record).unwrap();
    let lib = personalized_predict(&artifact, &record).unwrap();
    let url = format!("/models/{model_id}/predict");
    let tasks: Vec<_> = (0..16)
        .map(|_| {
            let (client, full, body) = (server.client.clone(), format!("{}{url}", server.base), body.clone());
            tokio::spawn(async move {
                client
                    .post(full)
                    .json(&body)
                    .send()
                    .await
                    .unwrap()
                    .json::<Value>()
                    .await
                    .unwrap()
            })
        })
        .collect();
    for t in tasks {
        let api = t.await.unwrap();
        let got: PredictionOutput = serde_json::from_value(api).unwrap();
        match (&got, &lib) {
            (
                PredictionOutput::Svm {
                    decision_value: a,
                    label: la,
                    ..
                },
                PredictionOutput::Svm {
                    decision_value: b,
                    label: lb,
                    ..
                },
            ) => {
                assert_eq!(a.to_bits(), b.to_bits());
                assert_eq!(la, lb);
            }
            _ => panic!("wrong kind"),
        }
    }
    let mut missing = body.clone();
    missing.as_object_mut().unwrap().remove("ageYears");
    let (code, err) = server.post(&url, &missing).await;
    assert_eq!(code, 422);
    assert_eq!(err["field"], "ageYears");
}
