# 불확실성 모델링 프레임워크 루트 패키지
