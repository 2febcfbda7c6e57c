use sceneact_core::autodiff::Tensor;

#[test]
fn matmul_matches_naive_product() {
    let a = Tensor::new(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
    let b = Tensor::new(3, 2, vec![7.0, 8.0, 9.0, 10.0, 11.0, 12.0]).unwrap();
    let c = a.matmul(&b).unwrap();
    assert_eq!(c.data, vec![58.0, 64.0, 139.0, 154.0]);
}

#[test]
fn matmul_rejects_mismatched_shapes() {
    let err = Tensor::zeros(2, 3).matmul(&Tensor::zeros(2, 3)).unwrap_err();
    assert_eq!(err.op, "matmul");
    assert!(err.detail.contains("2x3 by 2x3"));
}
